import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given
from hypothesis import strategies as st

from nlkg_inverse import (
    ExponentialNonlinearity,
    PolynomialNonlinearity,
    ZeroNonlinearity,
    cubic,
    free_series,
)
from nlkg_inverse.fields import dealias
from nlkg_inverse.nonlinearity import nonlinearity_from_config


def test_exponential_low_order_taylor_values():
    # N(y) = c1 (exp(c2 y^2) - 1) y has N'''(0) = 6 c1 c2, N^(5)(0) = 60 c1 c2^2
    for c1, c2 in ((1.0, 1.0), (0.5, 2.0), (-1.5, 0.25)):
        spec = ExponentialNonlinearity(c1, c2)
        assert spec.taylor_coefficient(3) == pytest.approx(6 * c1 * c2, rel=1e-14)
        assert spec.taylor_coefficient(5) == pytest.approx(60 * c1 * c2**2, rel=1e-14)


@given(
    c1=st.floats(-3.0, 3.0),
    c2=st.floats(0.0, 3.0),
    k=st.integers(0, 2),
)
def test_flat_to_second_order_at_origin(c1, c2, k):
    # the admissible class vanishes to second order at 0
    assert ExponentialNonlinearity(c1, c2).derivative(k, 0.0) == 0.0
    assert PolynomialNonlinearity((Fraction(1), Fraction(2))).derivative(k, 0.0) == 0.0
    assert ZeroNonlinearity().derivative(k, 0.0) == 0.0


@pytest.mark.parametrize(
    "spec",
    [
        cubic(1),
        PolynomialNonlinearity((Fraction(1), Fraction(1, 2), Fraction(2))),
        ExponentialNonlinearity(1.0, 1.0),
        ExponentialNonlinearity(0.7, 0.3),
    ],
)
@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_derivative_matches_central_difference(spec, k):
    ys = np.linspace(-1.0, 1.0, 9)
    h = 1e-5
    for y in ys:
        fd = (spec.derivative(k - 1, y + h) - spec.derivative(k - 1, y - h)) / (2 * h)
        exact = spec.derivative(k, y)
        scale = max(abs(exact), 1.0)
        assert abs(fd - exact) <= 1e-6 * scale


def test_taylor_coefficient_polynomial():
    assert cubic(1).taylor_coefficient(3) == 6.0  # d^3 y^3 = 3!
    # P(y) = 1 + y^2: N^(5)(0) = 5!/2! * P''(0) = 120
    spec = PolynomialNonlinearity((Fraction(1), Fraction(0), Fraction(1)))
    assert spec.taylor_coefficient(5) == 120.0
    assert spec.taylor_coefficient(4) == 0.0
    deep = PolynomialNonlinearity((Fraction(1),), max_derivative_order=20)
    assert deep.taylor_coefficient(17) == 0.0  # beyond degree


def test_taylor_coefficient_zero_variant():
    for n in range(3, 12):
        assert ZeroNonlinearity().taylor_coefficient(n) == 0.0


def test_taylor_coefficient_rejects_low_order():
    with pytest.raises(ValueError):
        cubic(1).taylor_coefficient(2)


def test_derivative_order_out_of_range():
    spec = PolynomialNonlinearity((Fraction(1),), max_derivative_order=6)
    with pytest.raises(ValueError):
        spec.derivative(7, 0.1)
    with pytest.raises(ValueError):
        spec.derivative_array(7, np.zeros(3))


def test_exponential_series_vs_closed_form():
    # Taylor series of the family against the recurrence-based closed form
    from math import factorial

    spec = ExponentialNonlinearity(1.3, 0.8, max_derivative_order=31)
    coeffs = {m: float(spec.exact_taylor(m)) for m in range(32)}
    ys = np.linspace(-1.0, 1.0, 11)
    for k in (0, 1, 2, 3):
        for y in ys:
            series = sum(
                coeffs[m] / float(factorial(m - k)) * y ** (m - k)
                for m in range(k, 32)
            )
            closed = spec.derivative(k, y)
            assert abs(series - closed) <= 1e-10 * max(1.0, abs(closed))


def test_polynomial_exact_taylor_matches_symbolic_expansion():
    # N(y) = P(y) y^3 expanded monomially: N^(n)(0) = n! [y^n] P(y) y^3
    p = (Fraction(2), Fraction(-1, 3), Fraction(5, 7))
    spec = PolynomialNonlinearity(p)
    from math import factorial

    for n in range(3, 9):
        idx = n - 3
        expected = (p[idx] if idx < len(p) else Fraction(0)) * factorial(n)
        assert spec.exact_taylor(n) == expected


def test_eval_on_field_matches_scalar_before_mask(grid, window, probe):
    spec = ExponentialNonlinearity(1.0, 1.0)
    w = free_series(0.1 * probe, window)
    raw = spec.derivative_array(2, w.frames)
    sampled = np.vectorize(lambda y: spec.derivative(2, y))(w.frames[3])
    np.testing.assert_allclose(raw[3], sampled, rtol=1e-12)
    masked = spec.apply_to(2, w)
    np.testing.assert_allclose(masked.frames, dealias(grid, raw), atol=1e-13)


def test_eval_on_field_zero_cases(grid, window, probe):
    w = free_series(probe, window)
    assert np.all(ZeroNonlinearity().apply_to(0, w).frames == 0.0)
    zero_series = 0.0 * w
    assert np.all(cubic(1).apply_to(0, zero_series).frames == 0.0)


def test_exponential_rejects_negative_c2():
    with pytest.raises(ValueError):
        ExponentialNonlinearity(1.0, -0.5)


def test_from_config():
    spec = nonlinearity_from_config({"kind": "polynomial", "p_coeffs": [1, 0, 1]})
    assert isinstance(spec, PolynomialNonlinearity)
    assert spec.taylor_coefficient(5) == 120.0
    spec = nonlinearity_from_config({"kind": "exponential", "c1": 1.0, "c2": 2.0})
    assert isinstance(spec, ExponentialNonlinearity)
    assert isinstance(nonlinearity_from_config({"kind": "zero"}), ZeroNonlinearity)
    with pytest.raises(ValueError):
        nonlinearity_from_config({"kind": "mystery"})
