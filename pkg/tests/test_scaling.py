import math

import pytest
from hypothesis import given, strategies as st

from ksep.errors import DomainError
from ksep.scaling import (ScalingMap, block_centering, make_block_map, make_time_map,
                          preimage_interval, time_centering)

# 30-digit evaluations of the closed forms at t = 100 and L = 10
A_100 = 2.15905202697551751703520800365
B_100 = 4.65990601784656075294831218024
A_BLOCK_10 = 2.92264183987946807164543058831


def test_time_map_values():
    vm = make_time_map(1.0, 100.0)
    assert vm.a == pytest.approx(A_100, rel=1e-14)
    assert vm.b == pytest.approx(B_100, rel=1e-14)
    assert vm.forward(10.0) == pytest.approx(10 / B_100 - A_100, rel=1e-12)
    assert vm.inverse(vm.forward(7.3)) == pytest.approx(7.3, rel=1e-12)
    assert vm.inverse(0.0) == pytest.approx(A_100 * B_100, rel=1e-13)


def test_block_map_values():
    vm = make_block_map(1.0, 100.0, 10)
    assert vm.a == pytest.approx(A_BLOCK_10, rel=1e-14)
    assert vm.b == pytest.approx(B_100, rel=1e-14)
    assert make_block_map(1.0, 7.0, 10).a == vm.a
    assert vm.to_dict() == {"sigma": 1.0, "a": vm.a, "b": vm.b, "kind": "block", "t": 100.0, "L": 10}


def test_domain_errors():
    with pytest.raises(DomainError):
        time_centering(1.0)
    with pytest.raises(DomainError):
        block_centering(10.0, 1)
    with pytest.raises(DomainError):
        ScalingMap(1.0, 0.0, 0.0)


def test_preimage_interval():
    ident = ScalingMap(1.0, 0.0, 1.0)
    assert preimage_interval(ident, (0, 1)) == (0.0, 1.0)
    vm = make_time_map(1.0, 100.0)
    lo, hi = preimage_interval(vm, (0, math.inf))
    assert lo == pytest.approx(A_100 * B_100) and hi == math.inf
    with pytest.raises(ValueError):
        preimage_interval(vm, (1, 1))


@given(st.floats(1.5, 1e8), st.floats(0.2, 5.0), st.floats(-50, 50), st.floats(0.01, 10))
def test_monotone_and_disjoint(t, sigma, x, d):
    vm = make_time_map(sigma, t)
    assert vm.forward(x) < vm.forward(x + d)
    a = preimage_interval(vm, (x, x + d))
    b = preimage_interval(vm, (x + d, x + 2 * d))
    assert a[1] <= b[0]
    assert vm.inverse(vm.forward(x)) == pytest.approx(x, rel=1e-12, abs=1e-9)


def test_first_order_location():
    # v_t^{-1}(0) / (sigma sqrt(t log t)) and v_{t,L}^{-1}(0) / (sigma sqrt(2 t log L))
    ts = [1e2, 1e4, 1e6, 1e8, 1e12]
    errs = [abs(make_time_map(1.3, t).inverse(0.0) / (1.3 * math.sqrt(t * math.log(t))) - 1) for t in ts]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    errs = [abs(make_block_map(1.0, t, int(t ** 0.25)).inverse(0.0)
                / math.sqrt(2 * t * math.log(int(t ** 0.25))) - 1) for t in ts]
    assert all(b < a for a, b in zip(errs, errs[1:]))
