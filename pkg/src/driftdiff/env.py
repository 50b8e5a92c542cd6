"""Random environment: drifted Brownian potential and its scale function.

The potential is W_kappa(x) = W(x) - (kappa/2) x on a uniform grid, two-sided,
with W(0) = 0. The scale function A(x) = int_0^x exp(W_kappa) is tabulated by
trapezoid quadrature and saturates at a finite A_inf for kappa > 0.

Numerical layout: at large kappa*x the quantities of interest live many orders
of magnitude below A_inf (the hitting target F(r) is defined through the gap
A_inf - A(F) = exp(-kappa r / 2)), so a forward cumulative sum of A would lose
them to rounding. The table therefore keeps per-cell increments and a backward
cumulative gap D(x) = A_inf - A(x), which retains full relative precision at
every node; interval quantities are formed from D, never by subtracting two
nearly equal A values. exp(W_kappa) itself stays inside float64 range for
|W_kappa| < ~700, which bounds the usable grid depth; the constructors check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "PotentialGrid",
    "ScaleTable",
    "build_potential",
    "extend_left",
    "scale_table",
    "solve_F",
    "exit_probability",
    "a_at",
    "a_inverse",
    "tail_gap",
]

# exp() argument beyond which float64 overflows (with a little margin)
_EXP_LIMIT = 700.0


@dataclass(frozen=True)
class PotentialGrid:
    """Two-sided potential W_kappa sampled on a uniform grid.

    Attributes:
        kappa: drift parameter, >= 0 (0 only for environment-level tests).
        step: spatial mesh h.
        x_min: leftmost node, <= 0.
        x_max: rightmost node, >= 0.
        values: W_kappa at the nodes, left to right; exactly 0 at x = 0.
        noise_scale: 0 for deterministic drift-only mode, 1 for Brownian noise.
        sup_right: sup of W_kappa over x >= 0, tracked during the build with
            exact within-cell bridge maxima so it carries no grid bias.
    """

    kappa: float
    step: float
    x_min: float
    x_max: float
    values: np.ndarray
    noise_scale: int
    sup_right: float
    origin_index: int
    _left_rng: Optional[np.random.Generator] = field(
        default=None, repr=False, compare=False
    )

    @property
    def nodes(self) -> np.ndarray:
        return self.x_min + self.step * np.arange(self.values.size)

    @property
    def n_nodes(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class ScaleTable:
    """Tabulated scale function of one PotentialGrid.

    Attributes:
        grid: the potential this table was built from.
        a_values: A at the nodes, signed (negative left of the origin),
            strictly increasing, exactly 0 at x = 0.
        a_inf: truncated estimate of A_inf (infinite when kappa = 0).
        tail_bound: analytic bound on the neglected integral beyond x_max.
        cell_inc: per-cell trapezoid increments of A, positive wherever
            exp(W_kappa) is resolvable in float64.
        d_values: backward gaps a_inf - A at the nodes; the precision-critical
            representation used by all interval arithmetic.
    """

    grid: PotentialGrid
    a_values: np.ndarray
    a_inf: float
    tail_bound: float
    cell_inc: np.ndarray
    d_values: np.ndarray
    origin_index: int


def _check_finite(**params: float) -> None:
    for name, v in params.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


def build_potential(
    kappa: float,
    step: float,
    x_min: float,
    x_max: float,
    rng_stream: np.random.Generator,
    noise_scale: int,
) -> PotentialGrid:
    """Sample (or lay out, in drift-only mode) the potential on a fresh grid.

    The right and left branches come from independent sub-streams of
    rng_stream; requested bounds are rounded outward to whole steps.
    """
    _check_finite(kappa=kappa, step=step, x_min=x_min, x_max=x_max)
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if step <= 0:
        raise ValueError("step must be positive")
    if x_min > 0 or x_max < 0:
        raise ValueError("need x_min <= 0 <= x_max")
    if noise_scale not in (0, 1):
        raise ValueError("noise_scale must be 0 or 1")

    n_right = int(math.ceil(x_max / step - 1e-9))
    n_left = int(math.ceil(-x_min / step - 1e-9))
    x_max = n_right * step
    x_min = -(n_left * step)

    left_rng: Optional[np.random.Generator] = None
    if noise_scale == 1:
        right_rng, left_rng = rng_stream.spawn(2)
        inc_r = -0.5 * kappa * step + math.sqrt(step) * right_rng.standard_normal(
            n_right
        )
        inc_l = 0.5 * kappa * step + math.sqrt(step) * left_rng.standard_normal(n_left)
    else:
        inc_r = np.full(n_right, -0.5 * kappa * step)
        inc_l = np.full(n_left, 0.5 * kappa * step)

    w_right = np.concatenate([[0.0], np.cumsum(inc_r)])
    w_left = np.concatenate([[0.0], np.cumsum(inc_l)])[::-1]
    values = np.concatenate([w_left[:-1], w_right])

    if noise_scale == 1 and n_right > 0:
        # exact sup over the continuum right branch: Brownian bridge maxima
        # inside each cell given its endpoints (drift does not change the
        # conditional bridge law)
        a = w_right[:-1]
        b = w_right[1:]
        u = 1.0 - right_rng.random(n_right)
        cell_max = 0.5 * (a + b + np.sqrt((b - a) ** 2 - 2.0 * step * np.log(u)))
        sup_right = float(cell_max.max())
    else:
        sup_right = float(w_right.max()) if n_right > 0 else 0.0

    return PotentialGrid(
        kappa=kappa,
        step=step,
        x_min=x_min,
        x_max=x_max,
        values=values,
        noise_scale=int(noise_scale),
        sup_right=sup_right,
        origin_index=n_left,
        _left_rng=left_rng,
    )


def extend_left(grid: PotentialGrid, new_x_min: float) -> PotentialGrid:
    """Grow the left branch down to new_x_min, conditionally on the values
    already drawn (the left sub-stream is continued, nothing is resampled).
    """
    if new_x_min > grid.x_min:
        raise ValueError("new_x_min must lie at or below the current x_min")
    n_more = int(math.ceil((grid.x_min - new_x_min) / grid.step - 1e-9))
    if n_more == 0:
        return grid
    if grid.noise_scale == 1:
        if grid._left_rng is None:
            raise ValueError("grid carries no left stream to continue")
        inc = 0.5 * grid.kappa * grid.step + math.sqrt(
            grid.step
        ) * grid._left_rng.standard_normal(n_more)
    else:
        inc = np.full(n_more, 0.5 * grid.kappa * grid.step)
    below = grid.values[0] + np.cumsum(inc)
    values = np.concatenate([below[::-1], grid.values])
    return PotentialGrid(
        kappa=grid.kappa,
        step=grid.step,
        x_min=grid.x_min - n_more * grid.step,
        x_max=grid.x_max,
        values=values,
        noise_scale=grid.noise_scale,
        sup_right=grid.sup_right,
        origin_index=grid.origin_index + n_more,
        _left_rng=grid._left_rng,
    )


def scale_table(grid: PotentialGrid, tail_tolerance: float) -> ScaleTable:
    """Tabulate A by trapezoid quadrature and bound the neglected tail.

    The tail beyond x_max is estimated analytically as
    exp(W_kappa(x_max)) * 2 / kappa, the mean of the remaining integral under
    pure drift; it is recorded as tail_bound and must not exceed
    tail_tolerance (raise: the caller must enlarge the grid).
    """
    if not (tail_tolerance > 0.0):
        raise ValueError("tail_tolerance must be positive")
    w = grid.values
    if float(w.max()) > _EXP_LIMIT:
        raise ValueError("potential exceeds float64 range; shrink the left extent")
    e_w = np.exp(w)
    # cells where exp(W) underflows (W < -745) contribute increments of 0.0;
    # they flatten the gap representation at the far tail, below anything a
    # float64 caller could ask about, and are otherwise harmless
    cell_inc = 0.5 * grid.step * (e_w[:-1] + e_w[1:])

    i0 = grid.origin_index
    if grid.kappa > 0.0:
        tail_est = float(e_w[-1]) * 2.0 / grid.kappa
    else:
        tail_est = math.inf
    if tail_est > tail_tolerance:
        raise ValueError(
            f"tail bound {tail_est:.3e} exceeds tolerance {tail_tolerance:.3e}; "
            "x_max is too small for this potential"
        )

    n = w.size
    d_values = np.empty(n)
    d_values[-1] = tail_est
    if n > 1:
        d_values[:-1] = tail_est + np.cumsum(cell_inc[::-1])[::-1]
    a_inf = float(d_values[i0])

    if math.isfinite(a_inf):
        a_values = a_inf - d_values
        a_values[i0] = 0.0
    else:
        # flat test mode: plain signed forward sums anchored at the origin
        a_values = np.empty(n)
        a_values[i0] = 0.0
        if i0 + 1 < n:
            a_values[i0 + 1 :] = np.cumsum(cell_inc[i0:])
        if i0 > 0:
            a_values[:i0] = -np.cumsum(cell_inc[:i0][::-1])[::-1]

    return ScaleTable(
        grid=grid,
        a_values=a_values,
        a_inf=a_inf,
        tail_bound=tail_est,
        cell_inc=cell_inc,
        d_values=d_values,
        origin_index=i0,
    )


def _locate(table: ScaleTable, x: float) -> tuple[int, float]:
    """Cell index and fractional offset of a point inside the grid."""
    g = table.grid
    if x < g.x_min or x > g.x_max:
        raise ValueError(f"point {x} outside the tabulated range [{g.x_min}, {g.x_max}]")
    t = (x - g.x_min) / g.step
    i = min(int(t), g.n_nodes - 2) if g.n_nodes > 1 else 0
    return i, t - i


def tail_gap(table: ScaleTable, x: float) -> float:
    """A_inf - A(x) on the piecewise-linear interpolant (full relative
    precision at any depth)."""
    i, frac = _locate(table, x)
    if frac == 0.0 or table.cell_inc.size == 0:
        return float(table.d_values[i])
    return float(table.d_values[i] - frac * table.cell_inc[i])


def _a_lin(table: ScaleTable, x: float) -> float:
    """A(x) by forward interpolation (flat mode and moderate scales)."""
    i, frac = _locate(table, x)
    if frac == 0.0 or table.cell_inc.size == 0:
        return float(table.a_values[i])
    return float(table.a_values[i] + frac * table.cell_inc[i])


def a_at(table: ScaleTable, x: float) -> float:
    """A(x) on the piecewise-linear interpolant."""
    if math.isfinite(table.a_inf):
        return table.a_inf - tail_gap(table, x)
    return _a_lin(table, x)


def a_inverse(table: ScaleTable, a: float) -> float:
    """x with A(x) = a; inverse of the piecewise-linear interpolant."""
    g = table.grid
    if math.isfinite(table.a_inf):
        gap = table.a_inf - a
        d = table.d_values
        if gap > d[0] or gap < d[-1]:
            raise ValueError("scale value outside the tabulated range")
        # d decreases in x; first index with d <= gap
        j = int(np.searchsorted(-d, -gap, side="left"))
        if j == 0:
            return float(g.x_min)
        i = j - 1
        frac = (d[i] - gap) / table.cell_inc[i] if table.cell_inc[i] > 0 else 0.0
    else:
        av = table.a_values
        if a < av[0] or a > av[-1]:
            raise ValueError("scale value outside the tabulated range")
        j = int(np.searchsorted(av, a, side="left"))
        if j == 0:
            return float(g.x_min)
        i = j - 1
        frac = (a - av[i]) / table.cell_inc[i] if table.cell_inc[i] > 0 else 0.0
    return float(g.x_min + (i + min(max(frac, 0.0), 1.0)) * g.step)


def solve_F(table: ScaleTable, r: float) -> float:
    """Root F(r) of A_inf - A(F) = exp(-kappa r / 2).

    Bisection on the monotone piecewise-linear interpolant of A, to absolute
    tolerance 1e-12 * r; never extrapolates beyond the tabulated range.
    """
    g = table.grid
    if g.kappa <= 0.0:
        raise ValueError("solve_F needs kappa > 0")
    if not (r > 0.0) or not math.isfinite(r):
        raise ValueError("r must be positive and finite")
    delta = math.exp(-0.5 * g.kappa * r)
    if not delta < table.a_inf - table.tail_bound:
        raise ValueError("target gap is not below a_inf - tail_bound")
    d = table.d_values
    if delta < d[-1] or delta > d[0]:
        raise ValueError(
            "root of the target-gap equation lies outside the tabulated range"
        )
    # locate the bracketing cell (d decreases in x)
    j = int(np.searchsorted(-d, -delta, side="left"))
    if j == 0:
        return float(g.x_min)
    i = j - 1
    lo = g.x_min + i * g.step
    hi = lo + g.step
    d_lo = float(d[i])
    inc = float(table.cell_inc[i])
    tol = 1e-12 * r
    lo_off, hi_off = 0.0, g.step
    for _ in range(200):
        if hi_off - lo_off <= tol:
            break
        mid = 0.5 * (lo_off + hi_off)
        if d_lo - (mid / g.step) * inc >= delta:
            lo_off = mid
        else:
            hi_off = mid
    return float(lo + 0.5 * (lo_off + hi_off))


def exit_probability(table: ScaleTable, x: float, y: float, z: float) -> float:
    """Probability, in this fixed environment, of reaching z before x when
    started at y: [A(y) - A(x)] / [A(z) - A(x)]."""
    if not (x < y < z):
        raise ValueError("need x < y < z")
    if math.isfinite(table.a_inf):
        num = tail_gap(table, x) - tail_gap(table, y)
        den = tail_gap(table, x) - tail_gap(table, z)
    else:
        num = _a_lin(table, y) - _a_lin(table, x)
        den = _a_lin(table, z) - _a_lin(table, x)
    if den <= 0.0:
        raise ValueError("degenerate scale interval")
    return float(min(max(num / den, 0.0), 1.0))
