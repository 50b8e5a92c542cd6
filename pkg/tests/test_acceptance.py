"""End-to-end acceptance gate: fifteen distribution-level checks.

One test per criterion, each printing a single PASS/FAIL line (visible under
``pytest -s``; the ``-v`` listing mirrors it). Seeds, grids and tolerances are
frozen together, so a red line here is a regression, not sampling noise.
"""

import math

import numpy as np
import scipy.stats as sps

from driftdiff.bessel import (
    besq_step,
    jacobi_occupation,
    k_beta_sample,
    sup_at_inverse_local_time,
    time_avg_inverse_square,
)
from driftdiff.cli import ExperimentConfig, export_csv, run_experiment
from driftdiff.diffusion import (
    hitting_sample_rk,
    hitting_time_path,
    maxlocal_law_sample,
    simulate_path,
)
from driftdiff.env import (
    a_at,
    a_inverse,
    build_potential,
    exit_probability,
    scale_table,
    tail_gap,
)
from driftdiff.stable import sample_stable_ca, stable_laplace
from driftdiff import stable
from driftdiff.stats import (
    EmpiricalDistribution,
    dkw_band,
    ks_statistic,
    ks_two_sample,
)
from driftdiff.variational import C1Problem, c1_bounds, c1_eigen


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def quenched_table(kappa, step, x_min, x_max, seed, tail=np.inf):
    grid = build_potential(kappa, step, x_min, x_max, philox(seed), 1.0)
    return scale_table(grid, tail)


def annealed_rk(kappa, step, x_min, x_max, tail, r, n, seed):
    g = philox(seed)
    out = []
    for _ in range(n):
        grid = build_potential(kappa, step, x_min, x_max, g, 1.0)
        out.append(hitting_sample_rk(scale_table(grid, tail), r, False, None, g))
    return out


def _report(num: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {num:02d} {name}: {'PASS' if ok else 'FAIL'}  ({detail})"
    print(line, flush=True)
    assert ok, line


def test_criterion_01_borodin_law():
    # sup of Brownian motion up to inverse local time 2: P(sup <= 1) = 1/e
    g = philox(4001)
    n = 100_000
    vals = np.fromiter((sup_at_inverse_local_time(2.0, g) for _ in range(n)),
                       float, n)
    delta = abs(float(np.mean(vals <= 1.0)) - math.exp(-1.0))
    band = dkw_band(n, 0.01)
    _report(1, "borodin-law", delta <= band,
            f"|ecdf(1) - 1/e| = {delta:.5f} <= {band:.5f}")


def test_criterion_02_besq_transition():
    # exact dimension-2 transition from 0 over unit time is Gamma(1, scale 2)
    g = philox(4002)
    n = 100_000
    draws = np.fromiter((besq_step((2.0, 0.0), 1.0, g) for _ in range(n)),
                        float, n)
    d = ks_statistic(EmpiricalDistribution.from_values(draws),
                     sps.gamma(a=1.0, scale=2.0).cdf)
    _report(2, "besq-transition", d <= 0.01, f"KS = {d:.5f} <= 0.01")


def test_criterion_03_bianeyor_k_identity():
    # index 1/2: K law matches the scaled one-sided stable via CMS
    n = 10_000
    g = philox(112)
    draws = np.fromiter((k_beta_sample(0.5, 0.02, g) for _ in range(n)),
                        float, n)
    scale = 0.5 ** (2.0 - 2.0) * stable.constants(0.5).c4 / 4.0
    stab = scale * sample_stable_ca(0.5, philox(113), size=n)
    d = ks_two_sample(EmpiricalDistribution.from_values(draws),
                      EmpiricalDistribution.from_values(stab))
    _report(3, "bianeyor-k-identity", d <= 0.03, f"KS2 = {d:.5f} <= 0.03")


def test_criterion_04_stable_laplace():
    n = 100_000
    s = sample_stable_ca(0.5, philox(4005), size=n)
    y = np.exp(-s)
    ref = stable_laplace(0.5, 1.0)
    delta = abs(float(y.mean()) - ref)
    band = 3.0 * float(y.std(ddof=1)) / math.sqrt(n)
    ok = math.isclose(ref, math.exp(-math.sqrt(2.0)), rel_tol=1e-12)
    _report(4, "stable-laplace", ok and delta <= band,
            f"|mean - exp(-sqrt 2)| = {delta:.5f} <= {band:.5f}")


def test_criterion_05_quenched_exit():
    # fixed environment: exit frequency sits in the DKW 99% band of the
    # scale-function ratio
    table = quenched_table(1.0, 0.05, -8.0, 8.0, 21)
    p = exit_probability(table, -4.0, 0.0, 3.0)
    g = philox(2100)
    n = 2000
    hits = sum(hitting_time_path(table, 3.0, g, lower=-4.0).side == "target"
               for _ in range(n))
    delta = abs(hits / n - p)
    band = dkw_band(n, 0.01)
    _report(5, "quenched-exit", delta <= band,
            f"|freq - A-ratio| = {delta:.5f} <= {band:.5f}")


def test_criterion_06_hitting_median_kappa2():
    samples = annealed_rk(2.0, 0.02, -30.0, 620.0, 1e-6, 500.0, 200, 966)
    med = float(np.median([s.h_total / 500.0 for s in samples]))
    _report(6, "hitting-median-kappa2", abs(med - 4.0) <= 0.4,
            f"median(H/r) = {med:.4f}, target 4 +- 0.4")


def test_criterion_07_hitting_median_kappa1():
    samples = annealed_rk(1.0, 0.05, -40.0, 420.0, 1e-9, 200.0, 500, 956)
    med = float(np.median(
        [s.h_total / (200.0 * math.log(200.0)) for s in samples]))
    _report(7, "hitting-median-kappa1", abs(med - 4.0) <= 1.2,
            f"median(H/(r log r)) = {med:.4f}, target 4 +- 1.2")


def test_criterion_08_maxlocal_law_kappa2():
    g = philox(908)
    n = 2000
    vals = np.empty(n)
    for k in range(n):
        grid = build_potential(2.0, 0.02, -30.0, 620.0, g, 1.0)
        vals[k] = maxlocal_law_sample(scale_table(grid, 1e-6), 500.0, g)

    def cdf(v):
        return np.exp(-8.0 / np.maximum(v, 1e-300) ** 2)

    d = ks_statistic(EmpiricalDistribution.from_values(vals), cdf)
    _report(8, "maxlocal-law-kappa2", d <= 0.05, f"KS = {d:.5f} <= 0.05")


def test_criterion_09_a_infinity_laws():
    # truncated scale limit vs 2/Exp(1), tracked sup of the potential vs
    # Exp(kappa), both at kappa = 1
    rng = np.random.default_rng(9)
    n = 10_000
    a_inf = np.empty(n)
    sups = np.empty(n)
    for i in range(n):
        g = build_potential(1.0, 0.01, 0.0, 60.0, rng, 1)
        a_inf[i] = scale_table(g, math.inf).a_inf
        sups[i] = g.sup_right
    ks_a = ks_statistic(EmpiricalDistribution.from_values(a_inf),
                        lambda y: np.exp(-2.0 / y))
    ks_s = ks_statistic(EmpiricalDistribution.from_values(sups),
                        lambda y: 1.0 - np.exp(-y))
    _report(9, "a-infinity-laws", ks_a <= 0.02 and ks_s <= 0.02,
            f"KS(a_inf) = {ks_a:.5f}, KS(sup) = {ks_s:.5f}, both <= 0.02")


def test_criterion_10_c1_sandwich():
    parts = []
    ok = True
    for kappa in (0.3, 0.5, 0.7):
        lo, hi = c1_bounds(kappa)
        v = c1_eigen(C1Problem(kappa))
        v_coarse = c1_eigen(C1Problem(kappa, mesh=256))
        ok = ok and lo <= v <= hi and abs(v - v_coarse) <= 1e-3
        parts.append(f"c1({kappa}) = {v:.6f} in [{lo:.4f}, {hi:.4f}]")
    half = c1_eigen(C1Problem(0.5))
    ok = ok and 1.0 <= half <= 1.5
    _report(10, "c1-sandwich", ok, "; ".join(parts))


def test_criterion_11_time_avg_inverse_square():
    g = philox(119)
    vals = [time_avg_inverse_square(6.0, "lemma", 1e6, g) for _ in range(200)]
    mean = float(np.mean(vals))
    _report(11, "time-avg-inverse-square", abs(mean - 0.25) <= 0.05,
            f"mean = {mean:.4f}, target 0.25 +- 0.05")


def test_criterion_12_jacobi_stationarity():
    edges, freq = jacobi_occupation(2.0, 4.0, philox(118), horizon=800.0,
                                    burn_in=20.0)
    d = float(np.max(np.abs(np.cumsum(freq) - sps.beta(1.0, 2.0).cdf(edges[1:]))))
    _report(12, "jacobi-stationarity", d <= 0.05, f"KS = {d:.5f} <= 0.05")


def test_criterion_13_cross_backend():
    stats = []
    for kappa, step, x_min, x_max, tseed, s_rk, s_path in (
        (2.0, 0.01, -40.0, 22.0, 7, 2700, 2701),
        (0.5, 0.05, -60.0, 40.0, 11, 2400, 2401),
    ):
        table = quenched_table(kappa, step, x_min, x_max, tseed)
        g = philox(s_rk)
        h_rk = [hitting_sample_rk(table, 20.0, False, None, g).h_total
                for _ in range(500)]
        g = philox(s_path)
        h_path = [hitting_time_path(table, 20.0, g).time for _ in range(500)]
        stats.append(ks_two_sample(EmpiricalDistribution.from_values(h_rk),
                                   EmpiricalDistribution.from_values(h_path)))
    ok = all(d <= 0.05 for d in stats)
    _report(13, "cross-backend", ok,
            f"KS2(kappa=2) = {stats[0]:.5f}, KS2(kappa=1/2) = {stats[1]:.5f}, "
            "both <= 0.05")


def test_criterion_14_determinism(tmp_path):
    # every experiment at N = 1000: identical CSV bytes across a rerun and
    # across thread counts
    configs = {
        "hitting-law": dict(kappa=2.0, r_or_t=20.0),
        "maxlocal-law": dict(kappa=2.0, r_or_t=100.0),
        "bianeyor-k": dict(kappa=0.5, space_step=0.02),
        "bianeyor-c": dict(space_step=0.02),
        "borodin-check": dict(r_or_t=2.0),
        "exit-check": dict(kappa=1.0, r_or_t=3.0),
        "c1-table": dict(),
        "theta-avg": dict(kappa=2.0, r_or_t=1e3),
        "jacobi-stationary": dict(kappa=2.0, r_or_t=30.0, dt=1e-3),
        "lil-track": dict(kappa=1.0, r_or_t=100.0),
        "bracket-l": dict(kappa=0.5, r_or_t=60.0),
        "bracket-i": dict(kappa=0.5, r_or_t=100.0),
    }
    unstable = []
    for name, kw in configs.items():
        cfg = ExperimentConfig(name, replicas=1000, seed=3, **kw)
        blobs = []
        for tag, threads in (("a", 1), ("b", 1), ("c", 4)):
            out = tmp_path / f"{name}-{tag}.csv"
            export_csv(run_experiment(cfg, threads=threads), str(out))
            blobs.append(out.read_bytes())
        if not (blobs[0] == blobs[1] == blobs[2]):
            unstable.append(name)
    _report(14, "determinism", not unstable,
            f"{len(configs) - len(unstable)}/{len(configs)} experiments "
            "byte-identical across rerun and 4 threads"
            + (f"; unstable: {unstable}" if unstable else ""))


def test_criterion_15_property_suites():
    # occupation identity, monotonicities, positivity and scale round-trips
    # over randomized environments; the claim is zero violations
    g = philox(7000)
    n_instances = 1000
    violations = 0
    eps = np.finfo(float).eps
    for _ in range(n_instances):
        kappa = 0.3 + 2.2 * g.random()
        step = 0.05 + 0.05 * g.random()
        half = 4.0 + 4.0 * g.random()
        grid = build_potential(kappa, step, -half, half, g, 1)
        table = scale_table(grid, np.inf)
        bad = False

        # positivity and monotonicity of the tabulated scale
        bad |= not np.all(table.cell_inc > 0.0)
        bad |= not np.all(np.diff(table.d_values) < 0.0)
        diffs = np.diff(table.a_values)
        bad |= not np.all(diffs >= 0.0)
        resolvable = table.cell_inc > 4.0 * eps * table.a_inf
        bad |= not np.all(diffs[resolvable] > 0.0)
        bad |= table.a_values[table.grid.origin_index] != 0.0

        # exit probability bounds and ordering in the start point
        p_lo = exit_probability(table, -half, -2.0 * step, half)
        p_hi = exit_probability(table, -half, 2.0 * step, half)
        bad |= not (0.0 <= p_lo <= p_hi <= 1.0)

        # scale round-trip away from tail saturation
        x = float(-half + (2.0 * half) * (0.1 + 0.8 * g.random()))
        if tail_gap(table, x) >= 1e-9 * table.a_inf:
            back = a_inverse(table, a_at(table, x))
            bad |= abs(back - x) > 1e-6 * max(1.0, half)

        # hitting-time split and local-time positivity
        r = max(2.0 * step, 0.6 * half)
        s = hitting_sample_rk(table, r, False, None, g)
        bad |= not (s.h_total == s.h_minus + s.h_plus)
        bad |= not (s.h_plus > 0.0 and s.h_minus >= 0.0)
        bad |= not (s.l_star >= s.l_neg >= 0.0 and s.l_star > 0.0)

        # occupation identity on a short path (skip the rare budget exits)
        try:
            path = simulate_path(table, 0.5, 0.05, g)
        except RuntimeError:
            path = None
        if path is not None:
            occ = float(path.lt_values @ np.diff(path.lt_edges))
            bad |= abs(occ - 0.5) > 1e-3 * 0.5

        violations += bad
    _report(15, "property-suites", violations == 0,
            f"{violations} violations across {n_instances} instances")
