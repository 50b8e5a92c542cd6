"""Diffusion in the drifted potential: path backend and hitting-law backend.

The process is X(t) = A_inv[B(T_inv(t))] for a Brownian motion B run on its
own clock, with T(u) the additive functional of exp(-2 W_kappa) along
A_inv(B). Two independent routes to its hitting functionals are provided:

* the path backend walks the exact skeleton of B on the tabulated scale
  nodes (exit probabilities are exact scale ratios) and accumulates the
  t-clock with the conditional expected excursion time of each visit, so
  hitting times, positions at fixed times and occupation local times all
  come from one trajectory;
* the hitting-law backend never builds a trajectory: the local-time field
  of B at the first passage is drawn exactly level by level (squared
  Bessel of dimension 2 between the target and the origin, dimension 0
  below), and the hitting time is its weighted integral.

Both backends work per fixed environment table; annealed laws come from
rebuilding the table per replica on an independent stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .bessel import c_beta_sample, k_beta_sample
from .env import ScaleTable, _locate, solve_F
from .stable import constants, t_pm

__all__ = [
    "PathSample",
    "PathHit",
    "HittingFunctionalSample",
    "LPMBracket",
    "IPMBracket",
    "LilRecord",
    "simulate_path",
    "hitting_time_path",
    "hitting_sample_rk",
    "l_pm_bracket",
    "i_pm_bracket",
    "maxlocal_law_sample",
    "lil_track",
]


@dataclass(frozen=True)
class PathSample:
    """One trajectory on a fixed environment table.

    positions[j] is X at times[j]; lt_values is the occupation local-time
    estimate on the cells bounded by lt_edges, so lt_values @ diff(lt_edges)
    reproduces the horizon.
    """

    table: ScaleTable
    times: np.ndarray
    positions: np.ndarray
    lt_edges: np.ndarray
    lt_values: np.ndarray
    horizon: float


@dataclass(frozen=True)
class PathHit:
    """First-passage record of the path backend.

    side is "target" or "lower"; time and l_star are taken at whichever
    barrier was reached first.
    """

    time: float
    l_star: float
    side: str


@dataclass(frozen=True)
class HittingFunctionalSample:
    """Joint hitting-time functionals at one target level.

    f_of_r is the level actually used (F(r) when use_F, else r itself);
    h_total = h_minus + h_plus exactly; l_star is the global maximum of
    the local-time field at the hitting time and l_neg its restriction to
    x < 0. truncated flags a negative leg still alive at the left edge.
    """

    r: float
    f_of_r: float
    h_total: float
    h_minus: float
    h_plus: float
    l_star: float
    l_neg: float
    truncated: bool


@dataclass(frozen=True)
class LPMBracket:
    l_minus_bar: float
    l_plus_bar: float
    l_star: float


@dataclass(frozen=True)
class IPMBracket:
    i_minus_bar: float
    i_plus_bar: float
    h_total: float


@dataclass(frozen=True)
class LilRecord:
    """One point of an almost-sure normalization track (qualitative use)."""

    r: float
    h: float
    l_star: float
    h_over_ra: float
    h_over_rlogr: float
    lstar_norm: float
    xsup_norm: float


# skeleton arrays are pure functions of the table; keep a few around since
# quenched experiments replay thousands of walks on one table
_SKELETON_CACHE: dict[int, tuple[ScaleTable, tuple]] = {}


def _phi(m: np.ndarray) -> np.ndarray:
    # (m - 1 + exp(-m)) / m^2 without cancellation; phi(0) = 1/2
    out = np.empty_like(m)
    small = np.abs(m) < 1e-6
    ms = m[small]
    out[small] = 0.5 - ms / 6.0 + ms * ms / 24.0
    mb = m[~small]
    out[~small] = (np.expm1(-mb) + mb) / (mb * mb)
    return out


def _skeleton_arrays(table: ScaleTable) -> tuple[np.ndarray, np.ndarray]:
    """Exit probabilities and expected excursion times for every interior node.

    From node i the walk leaves the interval (x_{i-1}, x_{i+1}) upward with
    the exact probability dA_left / (dA_left + dA_right). The expected time
    spent is the Green integral of exp(-2 W) against the excursion kernel;
    for W linear within each cell that integral has a closed form, h^2 times
    phi(dW) with phi(m) = (m - 1 + exp(-m)) / m^2, so no quadrature error is
    left beyond the piecewise linear potential itself. Both arrays are
    assembled from exp(-W_i)-rescaled scale increments, which keeps every
    intermediate inside float64 at any potential depth.
    """
    key = id(table)
    hit = _SKELETON_CACHE.get(key)
    if hit is not None and hit[0] is table:
        return hit[1]
    g = table.grid
    if g.n_nodes < 3:
        raise ValueError("the table needs at least three nodes")
    cinc = table.cell_inc
    if not np.all(cinc > 0.0):
        raise ValueError(
            "some grid cells fall below float64 resolution of the scale "
            "function; narrow the range or coarsen the grid"
        )
    w = g.values
    linc = np.log(cinc)
    wi = w[1:-1]
    ul = np.exp(linc[:-1] - wi)
    ur = np.exp(linc[1:] - wi)
    ml = wi - w[:-2]
    mr = w[2:] - wi
    h2 = g.step * g.step
    et_int = 2.0 * h2 * (ur * _phi(ml) + ul * _phi(-mr)) / (ul + ur)
    n = g.n_nodes
    p_right = np.empty(n)
    et = np.zeros(n)
    p_right[0] = p_right[-1] = 0.5
    p_right[1:-1] = ul / (ul + ur)
    et[1:-1] = et_int
    arrays = (p_right, et)
    if len(_SKELETON_CACHE) > 8:
        _SKELETON_CACHE.clear()
    _SKELETON_CACHE[key] = (table, arrays)
    return arrays


def _node_index(table: ScaleTable, x: float, name: str) -> int:
    g = table.grid
    if not (g.x_min < x < g.x_max):
        raise ValueError(f"{name} must lie strictly inside the tabulated range")
    i = int(round((x - g.x_min) / g.step))
    i = min(max(i, 1), g.n_nodes - 2)
    if abs(g.x_min + i * g.step - x) > 0.5 * g.step + 1e-9 * max(abs(x), 1.0):
        raise ValueError(f"{name} could not be snapped to the node grid")
    return i


def simulate_path(
    table: ScaleTable, horizon: float, dt: float, rng: np.random.Generator
) -> PathSample:
    """Run the diffusion to a fixed horizon on its tabulated environment.

    Raises RuntimeError if the driving motion leaves the tabulated scale
    range before the horizon is reached (enlarge the grid).
    """
    if not (horizon > 0.0 and math.isfinite(horizon)):
        raise ValueError("horizon must be positive and finite")
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ValueError("dt must be positive and finite")
    p_right, et = _skeleton_arrays(table)
    g = table.grid
    n_emit = int(math.floor(horizon / dt)) + 1
    pos = np.empty(n_emit, dtype=np.int64)
    occ = np.zeros(g.n_nodes)
    status, _, _ = _kernels.skeleton_clock(
        rng, p_right, et, occ, table.origin_index, horizon, dt, pos
    )
    if status != 0:
        raise RuntimeError(
            "the driving motion left the tabulated scale range before the "
            "horizon; enlarge the grid"
        )
    nodes = g.nodes
    lt_edges = g.x_min - 0.5 * g.step + g.step * np.arange(g.n_nodes + 1)
    return PathSample(
        table=table,
        times=dt * np.arange(n_emit),
        positions=nodes[pos],
        lt_edges=lt_edges,
        lt_values=occ / g.step,
        horizon=float(horizon),
    )


def hitting_time_path(
    table: ScaleTable,
    r: float,
    rng: np.random.Generator,
    *,
    lower: Optional[float] = None,
    max_steps: int = 2_000_000_000,
) -> PathHit:
    """First passage at r (path backend), optionally racing a lower barrier.

    Targets snap to the node grid. With a lower barrier the walk stops at
    whichever side is reached first, which makes exit frequencies exactly
    comparable to the scale-function ratio.
    """
    if not (r > 0.0 and math.isfinite(r)):
        raise ValueError("r must be positive and finite")
    p_right, et = _skeleton_arrays(table)
    i_target = _node_index(table, r, "r")
    if i_target <= table.origin_index:
        raise ValueError("r must snap above the origin")
    if lower is None:
        i_lower = -1
    else:
        if not lower < 0.0:
            raise ValueError("lower barrier must be negative")
        i_lower = _node_index(table, lower, "lower")
    targets = np.array([i_target], dtype=np.int64)
    h_out = np.empty(2)
    ls_out = np.empty(2)
    occ = np.zeros(table.grid.n_nodes)
    status, filled = _kernels.skeleton_hit(
        rng,
        p_right,
        et,
        occ,
        1.0 / table.grid.step,
        table.origin_index,
        i_lower,
        targets,
        h_out,
        ls_out,
        max_steps,
    )
    if status == 2:
        raise RuntimeError(
            "the walk left the tabulated range before any barrier; "
            "enlarge the grid"
        )
    if status == 3:
        raise RuntimeError("step budget exhausted before any barrier")
    side = "target" if status == 0 else "lower"
    k = filled - 1
    return PathHit(time=float(h_out[k]), l_star=float(ls_out[k]), side=side)


def hitting_sample_rk(
    table: ScaleTable,
    r: float,
    use_F: bool,
    space_step: Optional[float],
    rng: np.random.Generator,
) -> HittingFunctionalSample:
    """Draw (H, L*) at one target level from the exact local-time field.

    The field of the driving motion at its first passage of A(target) is
    generated level by level down the tabulated nodes (dimension 2 between
    the target and the origin, dimension 0 below, absorbed where it dies),
    and H splits into the x < 0 and x >= 0 integrals of the field. The
    tabulated grid fixes the ladder resolution; space_step is accepted for
    interface compatibility and is not used otherwise.
    """
    g = table.grid
    if g.kappa <= 0.0:
        raise ValueError("the hitting-law backend needs kappa > 0")
    if not (r > 0.0 and math.isfinite(r)):
        raise ValueError("r must be positive and finite")
    if space_step is not None and not space_step > 0.0:
        raise ValueError("space_step, when given, must be positive")
    target = solve_F(table, r) if use_F else float(r)
    if target <= 0.0:
        raise ValueError("target level is not positive; increase r")
    if target > g.x_max:
        raise ValueError("target level lies beyond the tabulated range")
    i_cell, frac = _locate(table, target)
    w = g.values
    cinc = table.cell_inc
    i0 = table.origin_index
    if frac > 0.0:
        w_t = w[i_cell] + frac * (w[i_cell + 1] - w[i_cell])
        pts_w = np.concatenate(([w_t], w[i_cell::-1]))
        dts = np.concatenate(([frac * cinc[i_cell]], cinc[i_cell - 1 :: -1]))
        dxs = np.concatenate(
            ([target - (g.x_min + i_cell * g.step)], np.full(i_cell, g.step))
        )
    else:
        pts_w = w[i_cell::-1]
        dts = cinc[i_cell - 1 :: -1]
        dxs = np.full(i_cell, g.step)
    n_plus = (1 if frac > 0.0 else 0) + (i_cell - i0)
    if n_plus < 1:
        raise ValueError("target level must sit above the first node past 0")
    if not np.all(dts > 0.0):
        # exp(W) underflow inside the ladder span would silently freeze the
        # field over those cells (identity transitions), biasing L* and H
        raise ValueError(
            "scale increments underflow float64 inside the ladder range "
            "(potential below about -745); reduce r"
        )
    dt_tilde = np.exp(np.log(dts) - pts_w[:-1])
    dw = pts_w[:-1] - pts_w[1:]
    ratio = np.exp(dw)
    store = np.empty(pts_w.size)
    _, absorbed, hp, hm, ls, ln_ = _kernels.rk_ladder(
        rng, dt_tilde, ratio, dw, dxs, n_plus, store
    )
    return HittingFunctionalSample(
        r=float(r),
        f_of_r=float(target),
        h_total=hm + hp,
        h_minus=float(hm),
        h_plus=float(hp),
        l_star=float(ls),
        l_neg=float(ln_),
        truncated=not absorbed,
    )


def l_pm_bracket(
    table: ScaleTable,
    r: float,
    rng: np.random.Generator,
    *,
    delta1: float = 2.0,
) -> LPMBracket:
    """Bracket variables for the maximum local time at H(F(r)).

    The bracket pair is 4 [kappa lambda t_pm(r) / (2 E)]^(1/kappa) with one
    common exponential E (the running maximum of one Brownian motion before
    an inverse local time, evaluated at both levels), alongside an
    independent draw of L* itself; comparisons are distribution-level.
    """
    kappa = table.grid.kappa
    bundle = constants(kappa, delta1)
    e = rng.standard_exponential()
    sup_m = bundle.lam * t_pm(bundle, r, -1) / (2.0 * e)
    sup_p = bundle.lam * t_pm(bundle, r, +1) / (2.0 * e)
    sample = hitting_sample_rk(table, r, True, None, rng)
    return LPMBracket(
        l_minus_bar=4.0 * (kappa * sup_m) ** (1.0 / kappa),
        l_plus_bar=4.0 * (kappa * sup_p) ** (1.0 / kappa),
        l_star=sample.l_star,
    )


def i_pm_bracket(
    table: ScaleTable,
    r: float,
    rng: np.random.Generator,
    *,
    c6: float = 1.0,
    profile_step: float = 0.01,
    delta1: float = 2.0,
) -> IPMBracket:
    """Bracket variables for the hitting time H(F(r)), kappa <= 1.

    For kappa < 1 the pair is 4 kappa^(1/kappa - 2) t_pm^(1/kappa) times
    (K -+ c6 t_pm^(1 - 1/kappa)) with one common draw of the K functional;
    at kappa = 1 it is 4 t_pm (C + 8 log t_pm) with one common C draw. c6
    stands in for an existence constant and is a fitted slack.
    """
    kappa = table.grid.kappa
    if not (0.0 < kappa <= 1.0):
        raise ValueError("the hitting-time bracket needs 0 < kappa <= 1")
    bundle = constants(kappa, delta1)
    t_m = t_pm(bundle, r, -1)
    t_p = t_pm(bundle, r, +1)
    if kappa < 1.0:
        kb = k_beta_sample(kappa, profile_step, rng)
        pre = 4.0 * kappa ** (1.0 / kappa - 2.0)
        i_m = pre * t_m ** (1.0 / kappa) * (kb - c6 * t_m ** (1.0 - 1.0 / kappa))
        i_p = pre * t_p ** (1.0 / kappa) * (kb + c6 * t_p ** (1.0 - 1.0 / kappa))
    else:
        cb = c_beta_sample(profile_step, rng)
        i_m = 4.0 * t_m * (cb + 8.0 * math.log(t_m))
        i_p = 4.0 * t_p * (cb + 8.0 * math.log(t_p))
    sample = hitting_sample_rk(table, r, True, None, rng)
    return IPMBracket(i_minus_bar=i_m, i_plus_bar=i_p, h_total=sample.h_total)


def maxlocal_law_sample(
    table: ScaleTable, r: float, rng: np.random.Generator
) -> float:
    """Normalized maximum local time, with H(F(r)) as the time proxy.

    Returns l_star / h_total^(1/kappa) for kappa > 1 and
    l_star log(h_total) / h_total at kappa = 1.
    """
    kappa = table.grid.kappa
    if kappa < 1.0:
        raise ValueError("the normalized maximum law needs kappa >= 1")
    sample = hitting_sample_rk(table, r, True, None, rng)
    if kappa == 1.0:
        return sample.l_star * math.log(sample.h_total) / sample.h_total
    return sample.l_star / sample.h_total ** (1.0 / kappa)


def lil_track(
    table: ScaleTable,
    r_schedule: Sequence[float],
    rng: np.random.Generator,
    *,
    a_fn: Optional[Callable[[float], float]] = None,
    max_steps: int = 20_000_000_000,
) -> list[LilRecord]:
    """Almost-sure normalization track along one trajectory (qualitative).

    One skeleton walk records H(r) and the running local-time maximum at
    each scheduled level. a_fn is the test function of the upper
    almost-sure criterion (default log). Normalizations involving
    log log of a quantity below e are reported as nan.
    """
    kappa = table.grid.kappa
    rs = [float(v) for v in r_schedule]
    if not rs or any(not (v > 0.0 and math.isfinite(v)) for v in rs):
        raise ValueError("r_schedule must be positive and finite")
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise ValueError("r_schedule must be strictly increasing")
    if a_fn is None:
        a_fn = math.log
    p_right, et = _skeleton_arrays(table)
    idx = [_node_index(table, v, "r_schedule entry") for v in rs]
    if any(b <= a for a, b in zip(idx, idx[1:])) or idx[0] <= table.origin_index:
        raise ValueError("r_schedule entries collide on the node grid")
    targets = np.asarray(idx, dtype=np.int64)
    h_out = np.empty(len(idx))
    ls_out = np.empty(len(idx))
    occ = np.zeros(table.grid.n_nodes)
    status, _ = _kernels.skeleton_hit(
        rng,
        p_right,
        et,
        occ,
        1.0 / table.grid.step,
        table.origin_index,
        -1,
        targets,
        h_out,
        ls_out,
        max_steps,
    )
    if status == 2:
        raise RuntimeError(
            "the walk left the tabulated range before the last level; "
            "enlarge the grid"
        )
    if status == 3:
        raise RuntimeError("step budget exhausted before the last level")

    def loglog(v: float) -> float:
        return math.log(math.log(v)) if v > math.e else math.nan

    records = []
    for r, h, ls in zip(rs, h_out, ls_out):
        ll_r = loglog(r)
        ll_h = loglog(h)
        lstar_norm = ls / (r / ll_r) ** (1.0 / kappa) if ll_r > 0.0 else math.nan
        if kappa < 1.0:
            xsup = (
                r / (h**kappa * ll_h ** (1.0 - kappa))
                if ll_h > 0.0
                else math.nan
            )
        elif kappa == 1.0:
            xsup = r * math.log(h) / h if h > 1.0 else math.nan
        else:
            xsup = r / h
        ra = r * a_fn(r)
        rlogr = r * math.log(r)
        records.append(
            LilRecord(
                r=r,
                h=float(h),
                l_star=float(ls),
                h_over_ra=float(h) / ra ** (1.0 / kappa) if ra > 0.0 else math.nan,
                h_over_rlogr=float(h) / rlogr if rlogr > 0.0 else math.nan,
                lstar_norm=lstar_norm,
                xsup_norm=xsup,
            )
        )
    return records
