"""Sequential sampling kernels (numba).

Everything here draws from an explicit numpy Generator, which numba shares
with the interpreter (state advances identically on both sides), so kernels
and wrapper code stay interchangeable without touching determinism.

The squared Bessel transition is exact: Z(t+dt) | Z(t)=z is 2*dt times a
Gamma(delta/2 + N, 1) variable with N ~ Poisson(z / (2 dt)), the zero-shape
convention giving the absorption atom for delta = 0.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np


@nb.njit(cache=True, inline="always")
def besq_transition(gen, delta, z, dt):
    n = gen.poisson(z / (2.0 * dt))
    shape = 0.5 * delta + n
    if shape == 0.0:
        return 0.0
    return 2.0 * dt * gen.gamma(shape, 1.0)


@nb.njit(cache=True)
def besq0_fill(gen, z0, dt, out):
    """Successive BESQ(0) values after z0 on a uniform ladder.

    Fills out[] until absorption or capacity; returns (count, absorbed).
    """
    z = z0
    for i in range(out.size):
        z = besq_transition(gen, 0.0, z, dt)
        out[i] = z
        if z == 0.0:
            return i + 1, True
    return out.size, False


@nb.njit(cache=True)
def besq_fill(gen, delta, z0, dt, out):
    """Successive BESQ(delta) values after z0 on a uniform ladder."""
    z = z0
    for i in range(out.size):
        z = besq_transition(gen, delta, z, dt)
        out[i] = z
    return out.size


@nb.njit(cache=True)
def besq0_absorption_steps(gen, z0, dt, max_steps):
    """Step count to absorption for BESQ(0), without storing the path."""
    z = z0
    for k in range(1, max_steps + 1):
        z = besq_transition(gen, 0.0, z, dt)
        if z == 0.0:
            return k, True
    return max_steps, False


@nb.njit(cache=True)
def k_functional(gen, p, lam, x1, ratio, h, max_x):
    """K-type functional: trapezoid of x^p * Z(x) for a BESQ(0) profile from
    lam, on a geometric-then-uniform grid (geometric near 0 because the
    weight is steep there). The [0, x1] sliver is added analytically with
    Z ~ lam. Returns (value, last_x, truncated)."""
    val = lam * x1 ** (p + 1.0) / (p + 1.0)
    x = x1
    z = besq_transition(gen, 0.0, lam, x1)
    w_prev = x1**p * z
    if z == 0.0:
        return val, x, False
    while x < max_x:
        dx = x * (ratio - 1.0)
        if dx > h:
            dx = h
        xn = x + dx
        z = besq_transition(gen, 0.0, z, dx)
        w = xn**p * z
        val += 0.5 * (w_prev + w) * dx
        x = xn
        w_prev = w
        if z == 0.0:
            return val, x, False
    return val, x, True


@nb.njit(cache=True)
def c_functional(gen, x1, ratio, h, max_x):
    """Compensated log functional of a BESQ(0) profile from 8:
    int_0^1 (Z(x)-8)/x dx + int_1^inf Z(x)/x dx, grid snapped to x=1.
    Returns (value, last_x, truncated)."""
    x = x1
    z = besq_transition(gen, 0.0, 8.0, x1)
    w_prev = (z - 8.0) / x1
    # the integrand tends to 0 with the profile's continuity at 0
    val = 0.5 * w_prev * x1
    if z == 0.0:
        return val, x, False
    while x < max_x:
        dx = x * (ratio - 1.0)
        if dx > h:
            dx = h
        if x < 1.0 and x + dx > 1.0:
            dx = 1.0 - x
        xn = x + dx
        z = besq_transition(gen, 0.0, z, dx)
        if xn <= 1.0:
            w = (z - 8.0) / xn
        else:
            w = z / xn
            if x <= 1.0:
                # left weight switches convention at the snapped node x=1
                w_prev += 8.0 / x
        val += 0.5 * (w_prev + w) * dx
        x = xn
        w_prev = w
        if z == 0.0:
            return val, x, False
    return val, x, True


@nb.njit(cache=True, inline="always")
def _jacobi_scale_density(x, kappa):
    return 1.0 / (x * (1.0 - x) ** (1.0 + kappa))


@nb.njit(cache=True)
def j_functional(gen, kappa, t, lam, q):
    """Weighted Jacobi-scale functional of a two-sided BESQ(0) profile.

    J = int_0^1 y (1-y)^(kappa-2) Z(S(y)/t) dy with Z the local-time profile
    at inverse local time lam (one BESQ(0) leg from lam per sign of S).
    The y-ladder is geometric in the distance to the relevant endpoint
    (factor q per step) and S-increments come from per-cell Simpson, exact
    to O((1-q)^4) relative because cells shrink with the distance.

    Also accumulates, from the same positive leg, the coupled companion:
    the K-type functional s^(1/kappa-2) Z(s) for kappa < 1, or the
    compensated log functional for kappa = 1.
    Returns (j_value, companion, truncated).
    """
    alpha = 1.0 / (4.0 + 2.0 * kappa)
    truncated = False

    # upward leg: y from alpha toward 1, s = S(y)/t from 0 upward
    j_val = 0.0
    comp = 0.0
    p = 1.0 / kappa - 2.0
    u = 1.0 - alpha
    y = alpha
    z = lam
    s = 0.0
    wj_prev = y * u ** (kappa - 2.0) * z
    absorbed = False
    first = True
    while u > 1e-290:
        un = u * q
        yn = 1.0 - un
        ym = 0.5 * (y + yn)
        ds = (
            (yn - y)
            / 6.0
            * (
                _jacobi_scale_density(y, kappa)
                + 4.0 * _jacobi_scale_density(ym, kappa)
                + _jacobi_scale_density(yn, kappa)
            )
        )
        dt_prof = ds / t
        sn = s + dt_prof
        z_prev = z
        z = besq_transition(gen, 0.0, z, dt_prof)
        wj = yn * un ** (kappa - 2.0) * z
        j_val += 0.5 * (wj_prev + wj) * (yn - y)
        if kappa < 1.0:
            if first:
                # analytic sliver over [0, s1] with Z ~ lam
                comp += lam * sn ** (p + 1.0) / (p + 1.0)
                first = False
            else:
                comp += 0.5 * (s**p * z_prev + sn**p * z) * dt_prof
        else:
            if first:
                # (Z-lam)/s tends to 0 in mean at 0; left endpoint dropped
                comp += 0.5 * ((z - lam) / sn) * sn
                first = False
            elif sn <= 1.0:
                comp += 0.5 * ((z_prev - lam) / s + (z - lam) / sn) * dt_prof
            elif s >= 1.0:
                comp += 0.5 * (z_prev / s + z / sn) * dt_prof
            else:
                # crossing cell: split at s=1 with linear Z interpolation
                z1 = z_prev + (z - z_prev) * (1.0 - s) / dt_prof
                comp += 0.5 * ((z_prev - lam) / s + (z1 - lam)) * (1.0 - s)
                comp += 0.5 * (z1 + z / sn) * (sn - 1.0)
        y = yn
        u = un
        s = sn
        wj_prev = wj
        if z == 0.0:
            absorbed = True
            break
    if not absorbed:
        truncated = True

    # downward leg: y from alpha toward 0, independent BESQ(0) leg in -s
    z = lam
    y = alpha
    wj_prev = y * (1.0 - y) ** (kappa - 2.0) * z
    while y > 1e-14:
        yn = y * q
        ym = 0.5 * (y + yn)
        ds = (
            (y - yn)
            / 6.0
            * (
                _jacobi_scale_density(y, kappa)
                + 4.0 * _jacobi_scale_density(ym, kappa)
                + _jacobi_scale_density(yn, kappa)
            )
        )
        dt_prof = ds / t
        z = besq_transition(gen, 0.0, z, dt_prof)
        wj = yn * (1.0 - yn) ** (kappa - 2.0) * z
        j_val += 0.5 * (wj_prev + wj) * (y - yn)
        y = yn
        wj_prev = wj
        if z == 0.0:
            break
    # a leg still alive at the y floor contributes at most O(y^2 max Z),
    # far below quadrature noise, so it is cut off rather than flagged

    return j_val, comp, truncated


@nb.njit(cache=True)
def jacobi_histogram(gen, d1, d2, y0, dt, n_burn, n_steps, nbins):
    """Occupation histogram of an Euler-discretized Jacobi diffusion,
    clamped to [0,1]."""
    y = y0
    hist = np.zeros(nbins, dtype=np.int64)
    sq = math.sqrt(dt)
    total = n_burn + n_steps
    for k in range(total):
        prod = y * (1.0 - y)
        if prod < 0.0:
            prod = 0.0
        y = y + (d1 - (d1 + d2) * y) * dt + 2.0 * math.sqrt(prod) * sq * gen.standard_normal()
        if y < 0.0:
            y = 0.0
        elif y > 1.0:
            y = 1.0
        if k >= n_burn:
            b = int(y * nbins)
            if b == nbins:
                b = nbins - 1
            hist[b] += 1
    return hist


@nb.njit(cache=True, inline="always")
def besq_transition_wide(gen, delta, z, dt):
    """BESQ transition that stays usable when z/(2 dt) is astronomical.

    Above ratio 1e12 the exact Poisson-Gamma mixture is within relative
    1e-6 of its Gaussian limit, which is cheaper and avoids stressing the
    Poisson sampler; below it the exact transition is used.
    """
    ratio = z / (2.0 * dt)
    if ratio > 1e12:
        zn = z + delta * dt + 2.0 * math.sqrt(z * dt) * gen.standard_normal()
        return zn if zn > 0.0 else 0.0
    n = gen.poisson(ratio)
    shape = 0.5 * delta + n
    if shape == 0.0:
        return 0.0
    return 2.0 * dt * gen.gamma(shape, 1.0)


@nb.njit(cache=True)
def rk_ladder(gen, dt_tilde, ratio, dw, dx, n_plus, store):
    """Hitting-time ladder in local-time units, descending from the target.

    The profile value carried here is z = exp(-W(x)) * Z(A(x)), the local
    time of the diffusion itself; by the Bessel scaling property the
    transition over a cell with scale increment dA started at point s is
    z' = exp(W_s - W_{s+1}) * T(delta, z, dA * exp(-W_s)), so every number
    in the loop stays order one no matter how deep W runs. Steps s < n_plus
    (between the target and the origin) use delta = 2, the rest delta = 0.
    Cells whose scale increment underflowed to zero contribute identity
    transitions.

    The running maxima are taken over within-cell suprema, not node values:
    given the endpoints, sup exp(-W) over a cell exceeds the larger endpoint
    by exp(olap) with olap drawn from the Brownian bridge maximum law (the
    profile factor Z is constant across a cell to within sqrt(exp(W) h), far
    below the valley scale that decides the maximum). Node-only maxima lose
    an order sqrt(h) fraction of the supremum.
    Returns (points, absorbed, h_plus, h_minus, l_star, l_neg).
    """
    n = store.size
    z = 0.0
    store[0] = 0.0
    hp = 0.0
    hm = 0.0
    ls = 0.0
    ln_ = 0.0
    prev = 0.0
    count = 1
    absorbed = False
    for s in range(n - 1):
        d = dt_tilde[s]
        if s < n_plus:
            if d > 0.0:
                z = besq_transition_wide(gen, 2.0, z, d)
        elif d > 0.0 and z > 0.0:
            z = besq_transition_wide(gen, 0.0, z, d)
        z *= ratio[s]
        store[count] = z
        cell = 0.5 * (prev + z) * dx[s]
        zmax = prev if prev > z else z
        if zmax > 0.0:
            u = gen.random()
            if u < 1e-300:
                u = 1e-300
            b = dw[s]
            olap = 0.5 * (
                math.sqrt(b * b - 2.0 * dx[s] * math.log(u)) - abs(b)
            )
            zmax *= math.exp(olap)
        if s < n_plus:
            hp += cell
        else:
            hm += cell
            if zmax > ln_:
                ln_ = zmax
        if zmax > ls:
            ls = zmax
        prev = z
        count += 1
        if s >= n_plus and z == 0.0:
            absorbed = True
            break
    return count, absorbed, hp, hm, ls, ln_


@nb.njit(cache=True)
def skeleton_hit(gen, p_right, et, occ, inv_cell, i0, lower, targets, h_out, ls_out, max_steps):
    """Scale-skeleton walk recording first-passage times at target nodes.

    Each visit to node i lasts the conditional expected excursion time
    et[i] and ends at a neighbor chosen with the exact scale-function
    probability p_right[i]; occupation divided by the cell width estimates
    the local time, whose running maximum is recorded at each passage.
    lower = -1 disables the lower barrier. Status: 0 all targets hit,
    1 lower barrier hit, 2 tabulated range left, 3 step budget exhausted.
    Returns (status, slots filled in h_out/ls_out).
    """
    i = i0
    t = 0.0
    lmax = 0.0
    m = 0
    n = p_right.size
    steps = 0
    while steps < max_steps:
        steps += 1
        dtv = et[i]
        t += dtv
        occ[i] += dtv
        v = occ[i] * inv_cell
        if v > lmax:
            lmax = v
        if gen.random() < p_right[i]:
            i += 1
        else:
            i -= 1
        if i == targets[m]:
            h_out[m] = t
            ls_out[m] = lmax
            m += 1
            if m == targets.size:
                return 0, m
        if i == lower:
            h_out[m] = t
            ls_out[m] = lmax
            return 1, m + 1
        if i <= 0 or i >= n - 1:
            return 2, m
    return 3, m


@nb.njit(cache=True)
def skeleton_clock(gen, p_right, et, occ, i0, horizon, emit_dt, pos_out):
    """Scale-skeleton walk to a fixed time horizon with node emission.

    pos_out[j] receives the node occupied at time j * emit_dt; occupation
    time lands in occ. The final excursion is clipped at the horizon so
    occ sums exactly to it. Status 0 on success, 1 if the walk reaches a
    grid edge first (the tabulated range is too small)."""
    i = i0
    t = 0.0
    j = 1
    pos_out[0] = i0
    n = p_right.size
    n_emit = pos_out.size
    while True:
        d = et[i]
        t_next = t + d
        if t_next >= horizon:
            occ[i] += horizon - t
            while j < n_emit:
                pos_out[j] = i
                j += 1
            return 0, i, horizon
        while j < n_emit and emit_dt * j <= t_next:
            pos_out[j] = i
            j += 1
        occ[i] += d
        t = t_next
        if gen.random() < p_right[i]:
            i += 1
        else:
            i -= 1
        if i <= 0 or i >= n - 1:
            return 1, i, t
