"""Small-deviation rate constant via a singular Sturm-Liouville eigenproblem.

The quadratic variational problem behind the lower almost-sure envelope,

    inf { (1/2) int_0^1 |phi'(v)|^2 dv :
          phi(0) = 0,  int_0^1 (1-v)^(1/kappa-2) |phi(v)|^2 dv >= 1 },

is attained on a one-dimensional ray (cost and constraint are sums of
identical scalar functionals over coordinates), so its value is half the
smallest generalized eigenvalue of

    -phi'' = mu w phi,   w(v) = (1-v)^(1/kappa-2),

with a Dirichlet condition at 0 and a natural (free) condition at 1. The
weight is integrable exactly for kappa in (0, 1) and singular at v = 1 for
kappa > 1/2, so all mass integrals are done in closed form per mesh cell;
the eigenvalue itself comes from inverse power iteration on the
finite-difference pencil, Richardson-extrapolated over a doubled mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

__all__ = ["C1Problem", "c1_bounds", "c1_eigen", "ground_state"]

_RAYLEIGH_TOL = 1e-12
_MAX_SWEEPS = 500


@dataclass(frozen=True)
class C1Problem:
    """Discretization request: kappa in (0,1) and interior node count."""

    kappa: float
    mesh: int = 512

    def __post_init__(self) -> None:
        if not (0.0 < self.kappa < 1.0):
            raise ValueError(
                "the weight (1-v)^(1/kappa-2) is integrable only for "
                "kappa in (0, 1)"
            )
        if self.mesh < 16:
            raise ValueError("mesh must be at least 16 interior nodes")

    def weight(self, v):
        """The singular weight (1-v)^(1/kappa-2) on [0, 1)."""
        return (1.0 - np.asarray(v, dtype=float)) ** (1.0 / self.kappa - 2.0)


def _hat_masses(kappa: float, n: int) -> np.ndarray:
    """Integrals of the weight against each hat function, in closed form.

    Everything is written in u = 1 - v so the only powers that appear are
    u^(c+1) and u^(c+2) with c + 1 = 1/kappa - 1 > 0, which vanish at the
    singular endpoint instead of blowing up. Index j = 1..n covers the
    interior nodes plus the free right-boundary node (half a hat).
    """
    c = 1.0 / kappa - 2.0
    h = 1.0 / n
    u = (n - np.arange(n + 1, dtype=float)) * h  # u_j = 1 - v_j, u_n = 0
    p1 = u ** (c + 1.0) / (c + 1.0)
    p2 = u ** (c + 2.0) / (c + 2.0)
    # rising half on [v_{j-1}, v_j]: (1/h) int u^c (u_{j-1} - u) du
    rise = (u[:-1] * (p1[:-1] - p1[1:]) - (p2[:-1] - p2[1:])) / h
    # falling half on [v_j, v_{j+1}]: (1/h) int u^c (u - u_{j+1}) du
    fall = ((p2[:-1] - p2[1:]) - u[1:] * (p1[:-1] - p1[1:])) / h
    m = np.zeros(n)
    m += rise
    m[:-1] += fall[1:]
    return m


def _smallest_mu(kappa: float, n: int, coords: int) -> tuple[float, np.ndarray]:
    """Inverse power iteration on the banded pencil K x = mu M x."""
    h = 1.0 / n
    band = np.empty((2, n))
    band[0, :] = -1.0 / h
    band[1, :] = 2.0 / h
    band[1, -1] = 1.0 / h  # natural condition at v = 1
    factor = cholesky_banded(band)
    m = _hat_masses(kappa, n)

    v_nodes = np.arange(1, n + 1, dtype=float) * h
    x = np.empty((n, coords))
    for k in range(coords):
        # any start with a component along the ground ray does; vary the
        # mixture so the multi-coordinate run is not accidentally scalar
        x[:, k] = v_nodes + 0.1 * k * np.sin((k + 1) * math.pi * v_nodes)
    x /= math.sqrt(float((m[:, None] * x * x).sum()))

    mu_prev = math.inf
    for _ in range(_MAX_SWEEPS):
        rhs = m[:, None] * x
        y = cho_solve_banded((factor, False), rhs)
        num = float((y * rhs).sum())  # y^T K y through K y = rhs
        den = float((m[:, None] * y * y).sum())
        mu = num / den
        y /= math.sqrt(den)
        x = y
        if abs(mu - mu_prev) <= _RAYLEIGH_TOL * mu:
            break
        mu_prev = mu
    else:
        raise RuntimeError("eigen-iteration did not converge")
    return mu, x


def ground_state(problem: C1Problem) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and its mesh eigenfunction (no extrapolation).

    The returned vector carries one sign everywhere (Perron ground state);
    a sign change would mean the iteration settled on an excited mode and
    is reported as an error.
    """
    mu, x = _smallest_mu(problem.kappa, problem.mesh, 1)
    phi = x[:, 0]
    if phi[np.argmax(np.abs(phi))] < 0.0:
        phi = -phi
    if not np.all(phi > 0.0):
        raise RuntimeError("ground state changed sign")
    return mu, phi


def c1_eigen(problem: C1Problem, *, coords: int = 1) -> float:
    """Value of the variational problem, (1/2) mu_min.

    Richardson extrapolation over problem.mesh and its double removes the
    leading quadratic mesh error. coords > 1 reruns the same pencil on
    that many identical coordinate blocks; the value must not move, which
    is the discrete form of the vector-to-scalar reduction.
    """
    if coords < 1:
        raise ValueError("coords must be a positive integer")
    mu_h, x = _smallest_mu(problem.kappa, problem.mesh, coords)
    mu_h2, _ = _smallest_mu(problem.kappa, 2 * problem.mesh, coords)
    if coords == 1 and not (np.all(x > 0.0) or np.all(x < 0.0)):
        raise RuntimeError("ground state changed sign")
    return 0.5 * (4.0 * mu_h2 - mu_h) / 3.0


def c1_bounds(kappa: float) -> tuple[float, float]:
    """Variational sandwich from the Cauchy-Schwarz step and the ramp trial.

    |phi(v)|^2 <= v int |phi'|^2 gives the lower bound 1/(2 B(2, 1/kappa-1));
    phi(v) = v gives the upper bound (1/2)/B(3, 1/kappa-1). Both Beta values
    are the telescoped closed forms of the same cell antiderivatives used
    for the mass matrix, evaluated over the whole interval.
    """
    if not (0.0 < kappa < 1.0):
        raise ValueError(
            "the weight (1-v)^(1/kappa-2) is integrable only for kappa in (0, 1)"
        )
    c = 1.0 / kappa - 2.0
    # int_0^1 (1-u) u^c du and int_0^1 (1-u)^2 u^c du
    beta_2 = 1.0 / (c + 1.0) - 1.0 / (c + 2.0)
    beta_3 = 1.0 / (c + 1.0) - 2.0 / (c + 2.0) + 1.0 / (c + 3.0)
    return 1.0 / (2.0 * beta_2), 0.5 / beta_3
