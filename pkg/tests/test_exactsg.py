import math
from fractions import Fraction

import numpy as np
import pytest

from ksep import exactsg
from ksep.errors import DomainError, NotPositiveDefinite, TooLarge
from ksep.exactsg import (SiteKernel, apply_semigroup, apply_U, box_indicator, build_space,
                          check_difference_formula, check_factorial_bound, check_negative_association,
                          check_nto2, check_product_measure_bound, check_VU, expm_apply, generator_U,
                          generator_V, h_count, is_positive_definite)


def test_build_space_examples():
    assert sorted(map(tuple, build_space(2, 2, 1).states.tolist())) == [(0, 1), (1, 0)]
    assert build_space(2, 2, 2).size == 4
    assert build_space(5, 2, 1).size == 20
    assert build_space(4, 3, 1).size == 4 * 3 * 2
    with pytest.raises(DomainError):
        build_space(2, 3, 1)
    with pytest.raises(TooLarge):
        build_space(6, 3, 3, cap=100)


def test_space_respects_cap():
    sp = build_space(4, 3, 2)
    for x in sp.states.tolist():
        assert max(x.count(v) for v in x) <= 2


@pytest.mark.parametrize("kern", [SiteKernel.path(5), SiteKernel.torus(4),
                                  SiteKernel.random(5, np.random.default_rng(3))])
def test_generators_are_conservative(kern):
    for K in (1, 2):
        V = generator_V(build_space(kern.m, 2, K), kern)
        assert np.allclose(V.row_sums(), 0, atol=1e-14)
        off = V.dense() - np.diag(np.diag(V.dense()))
        assert off.min() >= 0
    U = generator_U(kern, 2, 2)
    assert np.allclose(U.row_sums(), 0, atol=1e-14)
    # a symmetric kernel gives a symmetric U generator
    assert np.allclose(U.dense(), U.dense().T)


def test_semigroup_examples():
    kern = SiteKernel.path(5)
    sp = build_space(5, 2, 2)
    V = generator_V(sp, kern)
    f = np.random.default_rng(0).random(sp.size)
    assert np.array_equal(apply_semigroup(V, 0.0, f)[0], f)
    const, err = apply_semigroup(V, 2.0, np.full(sp.size, 3.0))
    assert np.allclose(const, 3.0, atol=1e-11)
    v, err = apply_semigroup(V, 1.3, f)
    assert np.allclose(v, expm_apply(V, 1.3, f), atol=1e-11)
    # one particle feels no exclusion
    sp1 = build_space(5, 1, 2)
    g = np.arange(5.0)
    assert np.allclose(apply_semigroup(generator_V(sp1, kern), 0.7, g)[0],
                       apply_U(kern, 1, 2, 0.7, g), atol=1e-11)


def test_VU_examples():
    kern = SiteKernel.path(5)
    sp = build_space(5, 2, 2)
    f = box_indicator(5, [[1, 2]] * 2)
    r = check_VU(sp, kern, exactsg.T_GRID, f)
    assert r.passed
    r0 = check_VU(sp, kern, [0.0], f)
    assert r0.slack == 0
    sp1 = build_space(5, 1, 3)
    r1 = check_VU(sp1, kern, exactsg.T_GRID, box_indicator(5, [[0, 3]]))
    assert abs(r1.slack) < 1e-11
    with pytest.raises(NotPositiveDefinite):
        check_VU(sp, kern, [1.0], -f)


def test_positive_definite_examples():
    for A in ([0], [1, 2], [0, 2, 3]):
        assert is_positive_definite(box_indicator(4, [A] * 2))
        assert is_positive_definite(box_indicator(4, [A] * 3))
    assert is_positive_definite(np.full((3, 3), 2.0))
    # 1(x != y) is recorded only; its form on zero-sum vectors is -|beta|^2 there
    neq = 1.0 - np.eye(3)
    assert is_positive_definite(neq) in (True, False)
    assert not is_positive_definite(-box_indicator(3, [[0]] * 2))


def test_negative_association_examples():
    kern = SiteKernel.path(5)
    sp = build_space(5, 2, 2)
    r = check_negative_association(sp, kern, [3, 4], 0.0)
    assert r.passed and r.quantities["max_lhs"] == 1 and abs(r.slack) < 1e-15
    assert check_negative_association(sp, kern, [3, 4], 1.0).passed


def test_difference_formula_examples():
    kern = SiteKernel.path(4)
    sp = build_space(4, 2, 2)
    r0 = check_difference_formula(sp, kern, [1, 2], 0.0)
    assert r0.passed and r0.quantities["max_abs_lhs"] == 0
    rall = check_difference_formula(sp, kern, [0, 1, 2, 3], 1.0)
    assert rall.passed and rall.quantities["max_abs_lhs"] < 1e-12
    r = check_difference_formula(sp, kern, [1, 2], 1.0)
    assert r.passed and r.quantities["max_abs_lhs"] > 1e-3
    # the same integral without the 1/K prefactor misses by a visible margin
    assert r.quantities["gap_without_1_over_K"] > 1e-4


def test_h_count_reduces_to_distinct_indicator_for_K1():
    sp = build_space(4, 3, 3)
    h = h_count(sp.states, [0, 1, 2], 1)
    inside = np.isin(sp.states, [0, 1, 2]).all(axis=1)
    assert np.array_equal(h, (inside & sp.distinct_mask()).astype(float))
    assert h_count(np.array([[0, 0]]), [0], 2)[0] == 2


def test_factorial_examples():
    kern = SiteKernel.path(6)
    r0 = check_factorial_bound(kern, 2, [0, 1, 2], [[2, 3]], [2], 0.0)
    # at t = 0: mu(A)^2 - (count)_2 with count 2 -> 4 - 2
    assert r0.quantities["diff"] == pytest.approx(2.0)
    r = check_factorial_bound(kern, 2, [0, 1, 2], [[3], [4, 5]], [2, 1], 0.5)
    assert r.passed and r.quantities["route_gap"] < 1e-10 and r.quantities["mu_gap"] < 1e-10
    with pytest.raises(TooLarge):
        check_factorial_bound(kern, 2, [0, 1], [[3]], [5], 0.5)


def test_nto2_examples():
    a = [[Fraction(0), Fraction(1, 3)], [Fraction(1, 3), Fraction(0)]]
    r2 = check_nto2(a, [Fraction(1), Fraction(2)], 2)
    assert r2.passed and r2.quantities["lhs"] == Fraction(2, 3)
    a3 = [[Fraction(0), Fraction(1), Fraction(2)], [Fraction(1), Fraction(0), Fraction(5)],
          [Fraction(2), Fraction(5), Fraction(0)]]
    r3 = check_nto2(a3, [Fraction(1)] * 3, 3)
    assert r3.passed and r3.quantities["lhs"] == 3 * 16 * 3
    rz = check_nto2(a3, [Fraction(0)] * 3, 4)
    assert rz.passed and rz.quantities["lhs"] == 0
    # a nonzero diagonal breaks the identity
    bad = [[Fraction(1), Fraction(0)], [Fraction(0), Fraction(0)]]
    rb = check_nto2(bad, [Fraction(1), Fraction(1)], 3)
    assert not rb.passed and rb.quantities["diagonal_mass"] == 1


def test_product_measure_examples():
    kern = SiteKernel.path(5)
    K = 2
    point = [np.eye(K + 1)[2], np.eye(K + 1)[2]] + [np.eye(K + 1)[0]] * 3
    r = check_product_measure_bound(kern, K, point, [3, 4], 2, 1.0)
    assert r.quantities["diff_nu"] == pytest.approx(r.quantities["diff_chi"], abs=1e-12)
    binom = [np.array([0.25, 0.5, 0.25])] * 2 + [np.eye(K + 1)[0]] * 3
    r1 = check_product_measure_bound(kern, K, binom, [3, 4], 1, 1.0)
    assert abs(r1.quantities["diff_nu"]) < 1e-12 and abs(r1.quantities["diff_chi"]) < 1e-12
    r2 = check_product_measure_bound(kern, K, binom, [3, 4], 2, 1.0, eta_below=[2, 1, 0, 0, 0])
    assert r2.passed


def test_suites_pass():
    for suite in (exactsg.identity_suite(), exactsg.sum_suite(times=(1.0,))):
        assert all(r.passed for r in suite)
    reps = exactsg.semigroup_suite(seed=5, count=4)
    assert all(r.passed for r in reps)
    js = reps[0].to_json()
    assert '"name"' in js
