"""Squared Bessel samplers, Ray-Knight local time profiles, and the
weighted local-time functionals built on them.

Transitions are exact (Poisson-mixed gamma), so every profile law is free
of time-discretization bias; only the spatial quadrature of the weighted
integrals is approximate. All samplers draw from an explicit numpy
Generator and own no state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import integrate, optimize

from . import _kernels

__all__ = [
    "BesqPath",
    "LocalTimeProfile",
    "JacobiState",
    "besq_step",
    "besq_path",
    "rn2_profile",
    "rn1_profile",
    "sup_at_inverse_local_time",
    "sup_cdf",
    "k_beta_sample",
    "c_beta_sample",
    "j_beta_sample",
    "j_beta_coupled",
    "jacobi_scale",
    "jacobi_scale_inverse",
    "jacobi_step",
    "jacobi_occupation",
    "time_avg_inverse_square",
]

_CHUNK = 1 << 17
_GEO_RATIO = 1.05
_SLIVER_FRAC = 1e-8


@dataclass(frozen=True)
class BesqPath:
    """Exact draws of a squared Bessel process along a grid.

    absorbed_at is the first grid point where the value hits 0; for
    dimension 0 the path stays at 0 from there on.
    """

    dimension: float
    start: float
    grid: np.ndarray
    values: np.ndarray
    absorbed_at: Optional[float]


@dataclass(frozen=True)
class LocalTimeProfile:
    """Brownian local time profile in the spatial coordinate.

    kind "RN2": profile at inverse local time, level = local time amount,
    grid runs from 0 upward and ell[0] = level.
    kind "RN1": profile at the first hit of a spatial level, grid in
    original coordinates with its top node exactly at the level, where the
    local time vanishes.

    truncated is set when the BESQ(0) leg was still alive at the tracking
    bound; absorption_coord is None in that case.
    """

    kind: str
    level: float
    grid: np.ndarray
    ell: np.ndarray
    truncated: bool
    absorption_coord: Optional[float]


@dataclass(frozen=True)
class JacobiState:
    d1: float
    d2: float
    y: float
    time: float

    def __post_init__(self) -> None:
        if not (self.d1 > 0.0 and self.d2 > 0.0):
            raise ValueError("Jacobi dimensions must be positive")
        if not (0.0 <= self.y <= 1.0):
            raise ValueError("Jacobi coordinate must lie in [0,1]")
        if not (self.time >= 0.0):
            raise ValueError("time must be nonnegative")


def besq_step(state: Tuple[float, float], dt: float, rng: np.random.Generator) -> float:
    """One exact transition of a squared Bessel process.

    state is a (dimension, value) pair. The draw is 2*dt*Gamma(delta/2 + N)
    with N ~ Poisson(value/(2*dt)); the zero-shape convention makes 0 an
    absorbing point for dimension 0.
    """
    delta, value = state
    if not (delta >= 0.0 and value >= 0.0):
        raise ValueError("dimension and value must be nonnegative")
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ValueError("dt must be positive and finite")
    n = rng.poisson(value / (2.0 * dt))
    shape = 0.5 * delta + n
    if shape == 0.0:
        return 0.0
    return float(2.0 * dt * rng.standard_gamma(shape))


def besq_path(
    dimension: float, start: float, grid, rng: np.random.Generator
) -> BesqPath:
    """Chain exact transitions along a strictly increasing grid.

    The grid must start at 0 (where the path equals start).
    """
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise ValueError("grid must be a 1-D array with at least two nodes")
    if g[0] != 0.0 or not np.all(np.diff(g) > 0.0):
        raise ValueError("grid must start at 0 and increase strictly")
    if not (dimension >= 0.0 and start >= 0.0):
        raise ValueError("dimension and start must be nonnegative")
    values = np.empty(g.size)
    values[0] = start
    z = start
    absorbed_at = None
    for k in range(1, g.size):
        z = besq_step((dimension, z), g[k] - g[k - 1], rng)
        values[k] = z
        if z == 0.0 and absorbed_at is None:
            absorbed_at = float(g[k])
    return BesqPath(float(dimension), float(start), g, values, absorbed_at)


def rn2_profile(
    a: float,
    space_step: float,
    rng: np.random.Generator,
    *,
    max_coord: float = 1e6,
    collect_values: bool = True,
) -> LocalTimeProfile:
    """Local time profile at inverse local time a.

    The profile is a BESQ(0) path from a in the spatial coordinate, stepped
    on a uniform grid that extends until absorption (or max_coord, flagged).
    The absorption coordinate is midpoint-corrected: the true zero hit lies
    somewhere inside the first vanishing cell. collect_values=False keeps
    only the absorption metadata, which makes large batch studies of the
    absorption law cheap; the draw sequence is identical either way.
    """
    if not (a > 0.0 and math.isfinite(a)):
        raise ValueError("local time amount must be positive and finite")
    if not (space_step > 0.0 and math.isfinite(space_step)):
        raise ValueError("space_step must be positive and finite")
    max_steps = int(max_coord / space_step)
    if max_steps < 1:
        raise ValueError("max_coord must allow at least one step")

    if collect_values:
        chunks = []
        z = a
        absorbed = False
        total = 0
        while not absorbed and total < max_steps:
            buf = np.empty(min(_CHUNK, max_steps - total))
            n, absorbed = _kernels.besq0_fill(rng, z, space_step, buf)
            chunks.append(buf[:n])
            total += n
            z = buf[n - 1]
        ell = np.concatenate([np.array([a]), *chunks])
        grid = np.arange(ell.size, dtype=float) * space_step
    else:
        total, absorbed = _kernels.besq0_absorption_steps(rng, a, space_step, max_steps)
        ell = np.empty(0)
        grid = np.empty(0)

    absorption = (total - 0.5) * space_step if absorbed else None
    return LocalTimeProfile("RN2", float(a), grid, ell, not absorbed, absorption)


def rn1_profile(
    r: float,
    left_extent: Optional[float],
    space_step: float,
    rng: np.random.Generator,
) -> LocalTimeProfile:
    """Local time profile at the first hit of spatial level r.

    Stored in original coordinates, increasing, with the top node exactly
    at r where the local time is 0. Running down from r: a BESQ(2) leg
    from 0 over [0, r] (in the distance-below-r parameter), continued below
    the origin as BESQ(0) until absorption or left_extent (default 50*r;
    hitting the bound sets the truncation flag, nothing is dropped).

    The step is snapped so that nodes land exactly on the level and on the
    origin.
    """
    if not (r > 0.0 and math.isfinite(r)):
        raise ValueError("level must be positive and finite")
    if not (space_step > 0.0 and math.isfinite(space_step)):
        raise ValueError("space_step must be positive and finite")
    if left_extent is None:
        left_extent = 50.0 * r
    if not (left_extent > 0.0 and math.isfinite(left_extent)):
        raise ValueError("left_extent must be positive and finite")

    n2 = max(1, round(r / space_step))
    h = r / n2
    down = np.empty(n2)
    _kernels.besq_fill(rng, 2.0, 0.0, h, down)

    z0 = down[-1]
    cap = math.ceil(left_extent / h)
    below_parts = []
    absorbed = z0 == 0.0
    used = 0
    while not absorbed and used < cap:
        buf = np.empty(min(_CHUNK, cap - used))
        n, absorbed = _kernels.besq0_fill(rng, z0, h, buf)
        below_parts.append(buf[:n])
        used += n
        z0 = buf[n - 1]

    ell_desc = np.concatenate([np.array([0.0]), down, *below_parts])
    grid_desc = r - h * np.arange(ell_desc.size, dtype=float)
    grid = grid_desc[::-1].copy()
    ell = ell_desc[::-1].copy()
    absorption = float(grid[0]) if absorbed else None
    return LocalTimeProfile("RN1", float(r), grid, ell, not absorbed, absorption)


def sup_cdf(v: float, y: float) -> float:
    """P(sup of the Brownian motion before inverse local time v is < y)."""
    if not (v > 0.0):
        raise ValueError("local time amount must be positive")
    if not (y > 0.0):
        raise ValueError("threshold must be positive")
    return math.exp(-v / (2.0 * y))


def sup_at_inverse_local_time(v: float, rng: np.random.Generator) -> float:
    """Draw the running maximum at inverse local time v by inverse CDF.

    Equals v/(2E) with E standard exponential.
    """
    if not (v > 0.0):
        raise ValueError("local time amount must be positive")
    return v / (2.0 * rng.standard_exponential())


def k_beta_sample(kappa: float, space_step: float, rng: np.random.Generator) -> float:
    """Weighted local-time functional with power weight x^(1/kappa - 2).

    The underlying profile is a BESQ(0) leg from 4(1+kappa); the quadrature
    grid is geometric near 0 (where the weight is steep) and uniform with
    the given step elsewhere, running until absorption.
    """
    if not (0.0 < kappa < 1.0):
        raise ValueError("index must lie in (0,1)")
    if not (space_step > 0.0 and math.isfinite(space_step)):
        raise ValueError("space_step must be positive and finite")
    lam = 4.0 * (1.0 + kappa)
    p = 1.0 / kappa - 2.0
    val, _, truncated = _kernels.k_functional(
        rng, p, lam, _SLIVER_FRAC * lam, _GEO_RATIO, space_step, 1e9
    )
    if truncated:
        raise RuntimeError("profile not absorbed within the tracked range")
    return float(val)


def c_beta_sample(space_step: float, rng: np.random.Generator) -> float:
    """Compensated log-weighted functional of a BESQ(0) profile from 8.

    Computes the integral of (ell(x)-8)/x over (0,1] plus the integral of
    ell(x)/x beyond 1; the grid is snapped to x=1 where the compensation
    switches off.
    """
    if not (space_step > 0.0 and math.isfinite(space_step)):
        raise ValueError("space_step must be positive and finite")
    val, _, truncated = _kernels.c_functional(
        rng, _SLIVER_FRAC * 8.0, _GEO_RATIO, space_step, 1e9
    )
    if truncated:
        raise RuntimeError("profile not absorbed within the tracked range")
    return float(val)


def j_beta_coupled(
    kappa: float, t: float, rng: np.random.Generator, *, refine: float = 0.995
) -> Tuple[float, float]:
    """Jacobi-scale functional together with its coupled companion.

    Returns (J, companion) where J integrates y(1-y)^(kappa-2) times the
    two-sided profile at inverse local time 4(1+kappa), evaluated along the
    Jacobi scale compressed by t, and the companion is the matching
    power-weighted functional (kappa < 1) or compensated log functional
    (kappa = 1) of the same positive profile leg. The coupling is what the
    large-t comparison statements are about, so both come from one draw.
    """
    if not (0.0 < kappa <= 1.0):
        raise ValueError("index must lie in (0,1]")
    if not (t > 0.0 and math.isfinite(t)):
        raise ValueError("t must be positive and finite")
    if not (0.9 <= refine < 1.0):
        raise ValueError("refine must be a ratio just below 1")
    lam = 4.0 * (1.0 + kappa)
    j_val, comp, truncated = _kernels.j_functional(rng, kappa, t, lam, refine)
    if truncated:
        raise RuntimeError("profile range not covered before the ladder floor")
    return float(j_val), float(comp)


def j_beta_sample(kappa: float, t: float, rng: np.random.Generator) -> float:
    j_val, _ = j_beta_coupled(kappa, t, rng)
    return j_val


def _power_integral(b: float, a: float, p: float) -> float:
    """Integral of u^p du from b to a, for positive a, b.

    Stable for p near -1: written through expm1 of (p+1)log(a/b), with the
    exact log limit at p = -1.
    """
    if p == -1.0:
        return math.log(a / b)
    q = p + 1.0
    return b**q * math.expm1(q * math.log(a / b)) / q


def _scale_given_u(kappa: float, u: float, y: float) -> float:
    """Jacobi scale value at y, with u = 1-y supplied by the caller.

    Both coordinates are taken as given rather than recomputed: near either
    endpoint only one of them holds full relative precision, and the caller
    knows which. The log term, the only piece sensitive to the relative
    accuracy of y, picks the exact coordinate per branch.
    """
    alpha = 1.0 / (4.0 + 2.0 * kappa)
    u_a = 1.0 - alpha

    n_terms = math.ceil(kappa) + 2
    if u < 0.5:
        total = math.log1p(-u) - math.log(alpha)
    else:
        total = math.log(y / alpha)
    for m in range(n_terms):
        total += _power_integral(u, u_a, m - 1.0 - kappa)
    q = n_terms - 1.0 - kappa  # at least 1, keeps the remainder bounded
    return total + _scale_remainder(q, alpha, 1.0 - u)


def _scale_remainder(q: float, alpha: float, y: float) -> float:
    """Integral of ((1-x)^q - 1)/x from alpha to y, q >= 1.

    The integrand is smooth and bounded, but adaptive quadrature loses
    accuracy when y is many decades below alpha, so the stretch below 1e-3
    uses the series expansion of the integrand instead.
    """

    def integrand(x: float) -> float:
        return math.expm1(q * math.log1p(-x)) / x

    x0 = 1e-3
    if y >= x0:
        val, _ = integrate.quad(integrand, alpha, y, epsabs=1e-13, epsrel=1e-12)
        return val
    head, _ = integrate.quad(integrand, alpha, x0, epsabs=1e-13, epsrel=1e-12)
    c1 = -q
    c2 = (q * q - q) / 4.0
    c3 = (-q / 3.0 + q * q / 2.0 - q**3 / 6.0) / 3.0

    def antideriv(x: float) -> float:
        return x * (c1 + x * (c2 + x * c3))

    return head + antideriv(y) - antideriv(x0)


def jacobi_scale(kappa: float, y: float) -> float:
    """Scale function of the Jacobi diffusion, vanishing at 1/(4+2*kappa).

    The integrand 1/(x(1-x)^(1+kappa)) is peeled into 1/x plus finitely
    many powers of (1-x) (all integrated in closed form) plus a smooth
    bounded remainder handled by adaptive quadrature, so both endpoint
    divergences are represented analytically.
    """
    if not (kappa > 0.0 and math.isfinite(kappa)):
        raise ValueError("index must be positive and finite")
    if not (0.0 < y < 1.0):
        raise ValueError("argument must lie strictly inside (0,1)")
    if y == 1.0 / (4.0 + 2.0 * kappa):
        return 0.0
    return _scale_given_u(kappa, 1.0 - y, y)


def jacobi_scale_inverse(kappa: float, s: float) -> float:
    """Inverse of the Jacobi scale by bracketed root finding.

    Solved in log coordinates of the distance to the nearest endpoint,
    where the scale varies at a bounded relative rate, so the root is
    accurate to machine precision even deep into the steep region near 1.
    """
    if not (kappa > 0.0 and math.isfinite(kappa)):
        raise ValueError("index must be positive and finite")
    if not math.isfinite(s):
        raise ValueError("scale value must be finite")
    alpha = 1.0 / (4.0 + 2.0 * kappa)
    if s == 0.0:
        return alpha

    if s > 0.0:
        # y in (alpha, 1), solve in m = log(1-y), decreasing in m
        def f(m: float) -> float:
            u = math.exp(m)
            return _scale_given_u(kappa, u, 1.0 - u) - s

        m_hi = math.log1p(-alpha) - 1e-12
        if f(m_hi) > 0.0:
            m_lo = m_hi
            m_hi = math.log1p(-alpha)
        else:
            # steep-end asymptote S ~ (1-y)^(-kappa)/kappa seeds the bracket
            m_lo = min(-math.log(kappa * (s + 1.0)) / kappa - 2.0, m_hi - 1.0)
            m_floor = -690.0 / kappa
            while f(m_lo) < 0.0:
                m_lo -= 8.0
                if m_lo < m_floor:
                    raise ValueError("scale value out of the invertible range")
        m = optimize.brentq(f, m_lo, m_hi, xtol=1e-15, rtol=1e-15)
        return 1.0 - math.exp(m)

    # y in (0, alpha), solve in w = log(y), increasing in w
    def g(w: float) -> float:
        return jacobi_scale(kappa, math.exp(w)) - s

    w_hi = math.log(alpha)
    w_lo = w_hi + 1.2 * s - 5.0  # S ~ log y + const near 0
    while g(w_lo) > 0.0:
        w_lo -= 8.0
        if w_lo < -700.0:
            raise ValueError("scale value out of the invertible range")
    w = optimize.brentq(g, w_lo, w_hi, xtol=1e-15, rtol=1e-15)
    return math.exp(w)


def jacobi_step(state: JacobiState, dt: float, rng: np.random.Generator) -> JacobiState:
    """One Euler step of the Jacobi diffusion, clamped to [0,1]."""
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ValueError("dt must be positive and finite")
    y = state.y
    prod = y * (1.0 - y)
    if prod < 0.0:
        prod = 0.0
    drift = (state.d1 - (state.d1 + state.d2) * y) * dt
    y_new = y + drift + 2.0 * math.sqrt(prod * dt) * rng.standard_normal()
    if y_new < 0.0:
        y_new = 0.0
    elif y_new > 1.0:
        y_new = 1.0
    return JacobiState(state.d1, state.d2, float(y_new), state.time + dt)


def jacobi_occupation(
    d1: float,
    d2: float,
    rng: np.random.Generator,
    *,
    dt: float = 1e-4,
    horizon: float = 2000.0,
    burn_in: float = 50.0,
    bins: int = 2000,
) -> Tuple[np.ndarray, np.ndarray]:
    """Occupation histogram of the Euler-discretized Jacobi diffusion.

    Returns (bin edges, occupation fractions) after discarding the burn-in,
    started from the stationary mean d1/(d1+d2).
    """
    if not (d1 > 0.0 and d2 > 0.0):
        raise ValueError("Jacobi dimensions must be positive")
    if not (dt > 0.0 and horizon > burn_in >= 0.0):
        raise ValueError("need dt > 0 and horizon > burn_in >= 0")
    n_burn = int(burn_in / dt)
    n_steps = int((horizon - burn_in) / dt)
    hist = _kernels.jacobi_histogram(
        rng, d1, d2, d1 / (d1 + d2), dt, n_burn, n_steps, bins
    )
    edges = np.linspace(0.0, 1.0, bins + 1)
    return edges, hist / hist.sum()


def time_avg_inverse_square(
    d: float,
    start_mode: Union[str, float],
    t: float,
    rng: np.random.Generator,
    *,
    first_node: float = 1e-3,
    ratio: float = 1.02,
) -> float:
    """Normalized time average of 1/R^2 along a BESQ(d) path.

    Returns (1/log t) * integral on [0, t] of ds/R^2(s), with R^2 stepped
    exactly on a geometric time grid and integrated by trapezoid. The
    default start ("lemma") draws R(0)^2 as the time-1 value of a squared
    Bessel of dimension d-2 from 0, i.e. Gamma((d-2)/2, scale 2); a fixed
    positive float is accepted instead.
    """
    if not (d > 4.0):
        raise ValueError("dimension must exceed 4")
    if not (t > 1.0 and math.isfinite(t)):
        raise ValueError("horizon must exceed 1")
    if start_mode == "lemma":
        z = 2.0 * rng.standard_gamma(0.5 * (d - 2.0))
    elif isinstance(start_mode, (int, float)) and start_mode > 0.0:
        z = float(start_mode)
    else:
        raise ValueError("start_mode must be 'lemma' or a positive number")

    total = 0.0
    s = 0.0
    w_prev = 1.0 / z
    s_next = first_node
    while s < t:
        s_next = min(s_next, t)
        z = besq_step((d, z), s_next - s, rng)
        w = 1.0 / z
        total += 0.5 * (w_prev + w) * (s_next - s)
        s = s_next
        w_prev = w
        s_next = s * ratio
    return total / math.log(t)
