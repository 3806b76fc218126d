"""End-to-end acceptance checks.

Each test records one PASS/FAIL line (printed again in the terminal
summary) and then asserts.  The simulation checks share session fixtures,
so the whole module runs each expensive sweep once.
"""
import itertools
import math
import time

import numpy as np
import pytest
from scipy import stats as sps

from conftest import record
from ksep import analytics, exactsg, stats
from ksep.analytics import IntervalUnion
from ksep.experiments import (LRule, count_test, gumbel_trend, mean_count_test, simulate_grid,
                              spacing_tests)
from ksep.kernel import JumpKernel
from ksep.profiles import BinomialStep, DeterministicStep
from ksep.scaling import make_time_map
from ksep.sim import Configuration, replica_generators, simulate_direct, simulate_stirring
from ksep.errors import WindowExit

pytestmark = pytest.mark.acceptance

NN = JumpKernel.nearest_neighbor()
GRID = (250.0, 500.0, 1000.0, 2000.0, 4000.0)
T_END = 4000.0
REPLICAS = 10 ** 4
INF = math.inf


def _fmt(x) -> str:
    return f"{x:.4g}"


# --- exact suite ------------------------------------------------------------------

def test_a01_semigroup_order():
    t0 = time.perf_counter()
    reps = [r for r in exactsg.semigroup_suite(seed=0, count=20) if r.name == "VU"]
    elapsed = time.perf_counter() - t0
    worst = min(r.slack for r in reps)
    ok = len(reps) >= 20 and worst >= -1e-10 and elapsed < 60
    record("A01", "V(t)1_{A^n} <= U(t)1_{A^n}", ok,
           f"{len(reps)} instances, min slack {_fmt(worst)}, {elapsed:.1f}s")
    assert ok


def test_a02_difference_formula():
    reps = [r for r in exactsg.semigroup_suite(seed=0, count=20, tol=1e-8)
            if r.name == "difference_formula"]
    gap = max(r.quantities["max_gap"] for r in reps)
    ok = all(r.passed for r in reps) and gap <= 1e-8
    record("A02", "U - V two-route agreement", ok, f"{len(reps)} cases, max gap {_fmt(gap)}")
    assert ok


def test_a03_deterministic_factorial_moments():
    reps = exactsg.factorial_suite(tol=1e-9)
    lo = min(r.quantities["diff"] for r in reps)
    hi = min(r.quantities["bound"] - r.quantities["diff"] for r in reps)
    ok = all(r.passed for r in reps) and lo >= -1e-9 and hi >= -1e-9
    record("A03", "0 <= prod mu^n - E prod (N)_n <= bound", ok,
           f"{len(reps)} cases, min lower slack {_fmt(lo)}, min upper slack {_fmt(hi)}")
    assert ok


def test_a04_product_measure_sandwich():
    reps = exactsg.product_suite(tol=1e-9)
    worst = min(r.slack for r in reps)
    ok = all(r.passed for r in reps)
    record("A04", "product-measure factorial sandwich", ok,
           f"{len(reps)} cases, min slack {_fmt(worst)}")
    assert ok


def test_a05_counting_identity():
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(1000):
        atoms = rng.integers(0, 6, size=int(rng.integers(0, 13)))
        A = set(rng.choice(6, size=int(rng.integers(1, 7)), replace=False).tolist())
        n = int(rng.integers(1, 5))
        inA = [i for i, x in enumerate(atoms.tolist()) if x in A]
        brute = sum(1 for _ in itertools.permutations(inA, n))
        mismatches += brute != analytics.falling_factorial_count(len(inA), n)
    record("A05", "factorial measure of A^n equals (mu(A))_n", mismatches == 0,
           f"1000 random measures, {mismatches} mismatches")
    assert mismatches == 0


def test_a06_kappa_tau_bounds():
    kb = analytics.kappa_bound_suite(NN)
    tb = analytics.tau_bound_suite(NN)
    worst = min(min(r["rhs"] - r["lhs"] for r in kb), min(r["rhs"] - r["lhs"] for r in tb))
    ok = len(kb) == len(tb) == 10 and worst >= -1e-9
    record("A06", "kappa and tau bounds", ok, f"10 + 10 points, min slack {_fmt(worst)}")
    assert ok


def test_a07_intensity_routes():
    res = analytics.route_agreement(NN, 1) + analytics.route_agreement(NN, 2)
    worst = max(r["rel_error"] for r in res)
    ok = worst < 1e-8
    record("A07", "intensity sum route vs positive-part route", ok,
           f"{len(res)} (t, y, K) points, max rel error {_fmt(worst)}")
    assert ok


# --- simulation suite -----------------------------------------------------------

@pytest.fixture(scope="session")
def full_runs():
    rule = LRule("c_bt", c=10.0, share=True)
    return {K: simulate_grid(NN, DeterministicStep(K), GRID, rule, REPLICAS, seed=800 + K,
                             keep=64, target="full")
            for K in (1, 2)}


def test_a08_gumbel_trend(full_runs):
    ok, parts = True, []
    for K, run in full_runs.items():
        _, trend = gumbel_trend(run, band=0.01, cap=0.08)
        ok &= trend["passed"]
        series = ", ".join(_fmt(s) for s in trend["statistic"])
        parts.append(f"K={K} KS [{series}] max rise {_fmt(trend['max_increase'])}")
    record("A08", "top particle Gumbel trend (full step)", ok, "; ".join(parts))
    assert ok


def test_a09_poisson_counts(full_runs):
    run = full_runs[2]
    intervals = [(1.0, 2.0), (2.0, 3.0), (3.0, 4.0)]
    res = count_test(run, T_END, intervals, ratio_band=(0.85, 1.15), corr_band=0.05,
                     mean_rel=0.15)
    d = res.details
    record("A09", "Poisson counts at t=4000 (K=2)", res.passed,
           f"ratios {[round(r, 3) for r in d['ratios']]}, "
           f"corr {[round(r, 3) for r in d['correlations']]}, "
           f"mean rel err {[round(r, 3) for r in d['relative_mean_error']]}")
    assert res.passed


def test_a10_truncated_step_constant():
    ok, parts = True, []
    for K in (1, 2):
        run = simulate_grid(NN, DeterministicStep(K), [T_END], LRule("c_bt", c=NN.sigma),
                            REPLICAS, seed=1000 + K, keep=64, target="psi")
        res = mean_count_test(run, T_END, [(0.0, INF)], rel_tol=0.15)
        ok &= res.passed
        d = res.details
        parts.append(f"K={K} L={run.L[T_END]} mean {_fmt(d['mean'])} vs {_fmt(d['target'])} "
                     f"(rel {_fmt(res.statistic)}, exact finite-t mean {_fmt(d['exact_finite_t'])})")
    record("A10", "mean count in (0, inf), L = ceil(sigma b_t)", ok, "; ".join(parts))
    assert ok


def test_a11_block_gumbel_trend():
    ok, parts = True, []
    for K in (1, 2):
        run = simulate_grid(NN, DeterministicStep(K), GRID, LRule("power", gamma=0.25),
                            REPLICAS, seed=1100 + K, keep=64, target="block")
        _, trend = gumbel_trend(run, band=0.01, cap=0.08)
        ok &= trend["passed"]
        series = ", ".join(_fmt(s) for s in trend["statistic"])
        parts.append(f"K={K} KS [{series}] max rise {_fmt(trend['max_increase'])}")
    record("A11", "top particle Gumbel trend (block, L = ceil(t^1/4))", ok, "; ".join(parts))
    assert ok


def test_a12_spacings(full_runs):
    run = full_runs[2]
    sp = spacing_tests(run, T_END, (1, 2), level=0.01)
    g1, g2 = sp["gap_1"], sp["gap_2"]
    mean2 = g2.details["mean"]
    ok = g1.passed and 0.4 <= mean2 <= 0.6
    record("A12", "rescaled spacings at t=4000 (K=2)", ok,
           f"gap1 KS {_fmt(g1.statistic)} vs crit {_fmt(g1.threshold)}, gap1 mean "
           f"{_fmt(g1.details['mean'])}, gap2 mean {_fmt(mean2)}")
    assert ok


def test_a13_mode_equivalence():
    K, t, window = 2, 1.0, (-10, 9)
    cfg = Configuration.from_sites({-2: 2, -1: 2, 0: 2}, K)
    n = 10 ** 5
    sites = (-1, 0, 1)

    def code(snap):
        occ = snap.occupation()
        return sum(occ.get(x, 0) * (K + 1) ** i for i, x in enumerate(sites))

    direct = [code(simulate_direct(cfg, NN, K, t, g)) for g in replica_generators(1300, n)]
    stirring, exits = [], 0
    for g in replica_generators(1301, n):
        try:
            stirring.append(code(simulate_stirring(cfg, NN, K, t, g, window=window)[0]))
        except WindowExit:
            exits += 1
    cells = (K + 1) ** len(sites)
    table = np.array([np.bincount(direct, minlength=cells), np.bincount(stirring, minlength=cells)])
    table = table[:, table.sum(axis=0) >= 10]
    p = float(sps.chi2_contingency(table).pvalue)
    ok = p > 0.01
    record("A13", "direct vs stirring occupation law", ok,
           f"joint law of eta at {sites}, {n} replicas per mode, {exits} window exits, p={_fmt(p)}")
    assert ok


def test_a14_kappa_decay():
    ks = {}
    for t in (50.0, 200.0, 800.0, 3200.0):
        A = IntervalUnion.of((0.0, 1.0)).preimage(make_time_map(NN.sigma, t))
        ks[t] = analytics.kappa(NN, t, A, [(-INF, 0.0)])[0]
    tail = [ks[t] for t in (200.0, 800.0, 3200.0)]
    ok = tail[0] > tail[1] > tail[2]
    record("A14", "kappa_t(v^-1(0,1], (-inf,0]) decreasing", ok,
           ", ".join(f"t={t:g}: {_fmt(k)}" for t, k in ks.items()))
    assert ok


def test_a15_binomial_thinning():
    prof = BinomialStep(2, 0.5)
    run = simulate_grid(NN, prof, [T_END], LRule("c_bt", c=10.0), 2 * REPLICAS, seed=1500,
                        keep=64, target="full")
    target = 0.5 * 2 * NN.sigma
    res = mean_count_test(run, T_END, [(0.0, INF)], target=target, rel_tol=0.15)
    d = res.details
    record("A15", "binomial step mean count in (0, inf)", res.passed,
           f"mean {_fmt(d['mean'])} +- {_fmt(d['stderr'])} vs {_fmt(target)} "
           f"(rel {_fmt(res.statistic)}, exact finite-t mean {_fmt(d['exact_finite_t'])})")
    assert res.passed
