import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ksep import analytics
from ksep.analytics import (IntervalUnion, falling_factorial_count, intensity, kappa, kappa_tau,
                            kappabound2_check, limit_intensity, mean_convergence_ratio, tau,
                            tau_bound_check)
from ksep.errors import DomainError
from ksep.kernel import JumpKernel
from ksep.profiles import BinomialStep, DeterministicStep, ProductPeriodic
from ksep.scaling import make_time_map

NN = JumpKernel.nearest_neighbor()
WIDE = JumpKernel.from_pairs([(1, 0.3), (-1, 0.3), (2, 0.2), (-2, 0.2)])
INF = math.inf


def test_interval_union_canonical_form():
    u = IntervalUnion.of((2, 3), (0, 1), (1, 1.5))
    assert u.components == ((0, 1.5), (2, 3))
    assert u.lam() == pytest.approx(1 - math.exp(-1.5) + math.exp(-2) - math.exp(-3))
    assert list(u.contains([0, 0.5, 1.5, 1.7, 3])) == [False, True, True, False, True]
    with pytest.raises(Exception):
        IntervalUnion.disjoint([(0, 2), (1, 3)])


def test_intensity_at_time_zero():
    step = DeterministicStep(2)
    assert intensity(step, NN, 2, 0.0, [(-0.5, INF)]) == 2
    assert intensity(step, NN, 2, 0.0, [(-3.5, INF)]) == 8
    assert intensity(step, NN, 2, 0.0, [(-3.5, INF)], route="step") == 8
    with pytest.raises(DomainError):
        intensity(step, NN, 2, 1.0, [(-INF, 0)])


@pytest.mark.parametrize("kernel", [NN, WIDE])
@pytest.mark.parametrize("t,y", [(0.5, 0.0), (3.0, -1.5), (40.0, 4.2), (500.0, -20.0)])
def test_route_agreement(kernel, t, y):
    step = DeterministicStep(2)
    s = intensity(step, kernel, 2, t, [(y, INF)], route="sum")
    p = intensity(step, kernel, 2, t, [(y, INF)], route="step")
    assert s == pytest.approx(p, rel=1e-9)


def test_route_agreement_truncated_step():
    step = DeterministicStep(1, 12)
    for S in ([(-3, 2)], [(-20, INF)], [(-5, -1), (0.5, 7)]):
        s = intensity(step, WIDE, 1, 7.0, S, route="sum")
        p = intensity(step, WIDE, 1, 7.0, S, route="step")
        assert s == pytest.approx(p, rel=1e-9, abs=1e-14)


def test_intensity_additive():
    prof = ProductPeriodic.from_means(2, [2, 0.5], 30)
    parts = [(-40, -3.2), (-3.2, 0), (0, 2.5), (2.5, INF)]
    whole = intensity(prof, WIDE, 2, 4.0, [(-40, INF)])
    assert sum(intensity(prof, WIDE, 2, 4.0, [p]) for p in parts) == pytest.approx(whole, rel=1e-12)
    assert intensity(prof, WIDE, 2, 4.0, parts) == pytest.approx(whole, rel=1e-12)


def test_total_mass_is_conserved():
    prof = BinomialStep(3, 0.4, 25)
    assert intensity(prof, NN, 3, 10.0, [(-INF, INF)]) == pytest.approx(25 * 3 * 0.4, rel=1e-10)


def test_limit_intensity_examples():
    assert limit_intensity("full", 2, 1.0, 2, [(0, INF)]) == 2
    assert limit_intensity("psi", 2, 1.0, 2, [(0, INF)], psi=INF) == 2
    assert limit_intensity("block", 1, 1.0, 1, [(0, 1)]) == pytest.approx(0.6321206, abs=1e-7)
    assert limit_intensity("psi", 1, 1.0, 1, [(0, INF)], psi=1.0) == pytest.approx(1 - math.exp(-1))
    with pytest.raises(DomainError):
        limit_intensity("psi", 1, 1.0, 1, [(0, 1)], psi=0.0)


def test_falling_factorial_examples():
    assert falling_factorial_count(3, 2) == 6
    assert falling_factorial_count(2, 3) == 0
    assert falling_factorial_count(5, 1) == 5


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=6), st.integers(1, 4), st.data())
def test_falling_factorial_matches_enumeration(weights, n, data):
    # atoms with multiplicities; A picks a subset of the support points
    A = data.draw(st.sets(st.integers(0, len(weights) - 1)))
    atoms = [x for x, w in enumerate(weights) for _ in range(w)]
    inA = [i for i, x in enumerate(atoms) if x in A]
    brute = sum(1 for _ in itertools.permutations(inA, n))
    assert falling_factorial_count(len(inA), n) == brute


def test_kappa_tau_at_time_zero():
    r = kappa_tau(NN, 0.0, [(-5, 0)], [(-2, INF)])
    assert r.kappa == 0
    assert r.tau == 2
    assert tau(NN, 0.0, [(-5, 0)], [(-2, INF)])[0] == 2
    with pytest.raises(DomainError):
        tau(NN, 1.0, [(0, INF)], [(3, INF)])


def test_kappa_nonnegative_and_error_reported():
    r = kappa_tau(WIDE, 20.0, [(2, INF)], [(-INF, 0)])
    assert r.kappa > 0 and r.tau > 0
    assert r.quad_error < 1e-6 * max(r.kappa, 1e-12) + 1e-9
    assert r.truncation_error < 1e-9


def test_kappabound2_example():
    res = kappabound2_check(NN, 5.0, 20.0, 10)
    assert res["holds"] and res["lhs"] <= res["rhs"]
    assert res["lhs"] >= 0


def test_tau_bound_examples():
    zero = tau_bound_check(DeterministicStep(1, 5), NN, 1, 0.0, [(0.5, INF)])
    assert zero["lhs"] == 0 and zero["rhs"] == 0
    res = tau_bound_check(DeterministicStep(1, 5), NN, 1, 1.0, [(3, INF)])
    assert res["holds"] and res["lhs"] > 0
    with pytest.raises(DomainError):
        tau_bound_check(DeterministicStep(2, 5, 1), NN, 2, 1.0, [(3, INF)])


def test_tau_monotone_in_block_length():
    vals = [tau(WIDE, 6.0, [(1, INF)], [(-L, 0)])[0] for L in (1, 2, 4, 8, 16, 32)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_bound_suites_hold():
    for kern in (NN, WIDE):
        assert all(r["holds"] for r in analytics.kappa_bound_suite(kern))
        assert all(r["holds"] for r in analytics.tau_bound_suite(kern))
    assert all(r["holds"] for r in analytics.route_agreement(NN, 2))


def test_mean_convergence_trend():
    prof = ProductPeriodic.from_means(2, [2, 0])
    errs = []
    for t in (100.0, 1000.0, 10000.0):
        r = mean_convergence_ratio(prof, NN, 2, t, make_time_map(1.0, t), [(0, INF)], 1.0)
        errs.append(abs(r - 1))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.02


def test_kappa_decays_along_grid():
    ks = []
    for t in (200.0, 800.0):
        A = IntervalUnion.of((0, 1)).preimage(make_time_map(1.0, t))
        ks.append(kappa(NN, t, A, [(-INF, 0)])[0])
    assert ks[1] < ks[0]
