"""Control functions: closed forms vs truncated series, certificates, limits."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from derivstab import (
    Constant,
    ControlError,
    Power,
    SeparablePowerSum,
    hyers_bound,
    make_matrix_algebra,
    partial_sum_bound,
    phi,
    phi_tilde,
    phi_tilde_series,
    tail_bound,
)

M2 = make_matrix_algebra(2)
UNIT = M2.one()
ZERO = M2.zero()


def quad(a, b, c, d):
    return (a, b, c, d)


def random_args(rng):
    def elem():
        return M2.element(rng.standard_normal(4) + 1j * rng.standard_normal(4))
    return quad(elem(), elem(), elem(), elem())


def controls(rng):
    yield Constant(epsilon=float(rng.uniform(0.001, 2.0)))
    yield Power(beta=float(rng.uniform(0.01, 1.0)), p=float(rng.uniform(-2.0, 0.99)))
    yield SeparablePowerSum(slots=tuple(
        (float(rng.uniform(0.01, 1.0)), float(rng.uniform(-2.0, 0.99)))
        for _ in range(4)))


def test_constant_phi_tilde_is_exactly_epsilon():
    for eps in (0.01, 0.3, 1.0, 2.5):
        cf = Constant(epsilon=eps)
        value = phi_tilde(cf, UNIT, UNIT, ZERO, ZERO)
        assert value.value == eps            # bit-exact, not approximate
        assert value.tail_bound == 0.0
        assert hyers_bound(cf, UNIT) == eps


def test_power_closed_form_golden_value():
    # beta ||a||^p / (1 - 2^{p-1}) at beta = 0.1, p = 0.5, ||a|| = 1.
    cf = Power(beta=0.1, p=0.5)
    assert hyers_bound(cf, UNIT) == pytest.approx(0.34142135623730957, rel=1e-15)
    assert hyers_bound(cf, UNIT) == pytest.approx(
        0.1 / (1.0 - 2.0 ** (-0.5)), rel=1e-14)


def test_phi_matches_plain_formula():
    cf = Power(beta=0.2, p=0.5)
    a = M2.element([3.0, 0.0, 0.0, 0.0])
    b = M2.element([0.0, 4.0, 0.0, 0.0])
    expected = 0.2 * (math.sqrt(3.0) + 2.0)   # 0.2 (3^0.5 + 4^0.5), zero slots drop
    assert phi(cf, a, b, ZERO, ZERO) == pytest.approx(expected, rel=1e-14)
    assert phi(Constant(epsilon=0.7), a, b, a, b) == 0.7


def test_closed_form_within_series_certificate():
    rng = np.random.default_rng(1009)
    checked = 0
    for _ in range(250):
        for cf in controls(rng):
            args = random_args(rng)
            closed = phi_tilde(cf, *args)
            series = phi_tilde_series(cf, *args)
            assert closed.tail_bound == 0.0
            assert series.tail_bound >= 0.0
            assert abs(closed.value - series.value) <= series.tail_bound
            checked += 1
    assert checked >= 750


def test_partial_sums_sandwich_the_limit():
    rng = np.random.default_rng(1013)
    for cf in controls(rng):
        a = M2.element(rng.standard_normal(4) + 1j * rng.standard_normal(4))
        limit = hyers_bound(cf, a)
        previous = 0.0
        for n in range(1, 60):
            partial = partial_sum_bound(cf, a, n)
            tail = tail_bound(cf, a, n)
            assert partial >= previous          # nondecreasing, float-exact
            assert partial <= limit + 1e-15 * limit
            assert partial + tail >= limit - 1e-12 * limit
            previous = partial


def test_dyadic_homogeneity_of_power_control():
    cf = Power(beta=0.3, p=0.4)
    a = M2.element([1.0, -2.0, 0.5j, 0.0])
    doubled = M2.element(2.0 * np.asarray(a.coords))
    assert hyers_bound(cf, doubled) == pytest.approx(
        2.0 ** 0.4 * hyers_bound(cf, a), rel=1e-13)


def test_separable_power_sum_combines_slots():
    cf = SeparablePowerSum(slots=((0.1, 0.5), (0.2, 0.0), (0.3, -1.0), (0.4, 0.25)))
    a = M2.element([2.0, 0.0, 0.0, 0.0])
    parts = [0.1 * 2.0 ** 0.5, 0.2, 0.3 / 2.0, 0.4 * 2.0 ** 0.25]
    assert phi(cf, a, a, a, a) == pytest.approx(sum(parts), rel=1e-14)
    # Each slot extrapolates with its own decay rate.
    expected = 0.5 * sum(part / (1.0 - 2.0 ** (p - 1.0))
                         for part, p in zip(parts, (0.5, 0.0, -1.0, 0.25)))
    assert phi_tilde(cf, a, a, a, a).value == pytest.approx(expected, rel=1e-13)


def test_growth_exponent_property():
    assert Constant(epsilon=1.0).growth_exponent == 0.0
    assert Power(beta=1.0, p=0.7).growth_exponent == 0.7
    mixed = SeparablePowerSum(slots=((1.0, 0.1), (1.0, 0.8), (1.0, -2.0), (1.0, 0.3)))
    assert mixed.growth_exponent == 0.8


def test_divergent_exponents_are_rejected():
    with pytest.raises(ControlError, match="diverges"):
        Power(beta=0.1, p=1.0)
    with pytest.raises(ControlError, match="diverges"):
        Power(beta=0.1, p=1.5)
    with pytest.raises(ControlError):
        SeparablePowerSum(slots=((0.1, 0.5), (0.1, 1.0), (0.1, 0.5), (0.1, 0.5)))
    with pytest.raises(ControlError):
        Constant(epsilon=-0.1)
    with pytest.raises(ControlError):
        Power(beta=-1.0, p=0.5)
    with pytest.raises(ControlError):
        Power(beta=0.1, p=float("nan"))


def test_zero_norm_contributes_zero():
    # 0^p := 0 for every exponent, including negative p.
    cf = Power(beta=0.5, p=-1.0)
    assert phi(cf, ZERO, ZERO, ZERO, ZERO) == 0.0
    assert hyers_bound(cf, ZERO) == 0.0


@given(beta=st.floats(1e-3, 10.0, width=64), p=st.floats(-3.0, 0.99, width=64),
       scale=st.floats(1e-3, 1e3, width=64))
def test_series_certificate_property(beta, p, scale):
    cf = Power(beta=beta, p=p)
    a = M2.element([scale, 0.0, 0.0, scale])
    closed = phi_tilde(cf, a, a, ZERO, ZERO)
    series = phi_tilde_series(cf, a, a, ZERO, ZERO)
    assert abs(closed.value - series.value) <= series.tail_bound
