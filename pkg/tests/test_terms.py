import numpy as np
import pytest
from fractions import Fraction
from math import factorial

from nlkg_inverse import (
    FieldSeries,
    build_A,
    build_cubic_W,
    build_W,
    build_W_tilde,
    evaluate,
    free_series,
    k_max,
    picard_series,
    specialize,
)
from nlkg_inverse.fields import dealias, duhamel
from nlkg_inverse.nonlinearity import PolynomialNonlinearity, ZeroNonlinearity, cubic
from nlkg_inverse.terms import (
    Duhamel,
    Product,
    WPolynomial,
    WPower,
    WTerm,
    product,
    w_degree,
)


@pytest.mark.parametrize("n,expected", [(5, 1), (6, 1), (7, 2), (8, 2), (9, 3), (11, 3)])
def test_k_max(n, expected):
    assert k_max(n) == expected


def test_k_max_rejects_small_orders():
    with pytest.raises(ValueError):
        k_max(4)


GOLDEN_W = {
    5: "10 * y3^2 * w^2 * G(w^3)",
    6: "15 * y3*y4 * w^2 * G(w^4) + 20 * y3*y4 * w^3 * G(w^3)",
    7: (
        "21 * y3*y5 * w^2 * G(w^5) + 35 * y3*y5 * w^4 * G(w^3) + "
        "210 * y3^3 * w^2 * G(w^2 * G(w^3)) + 70 * y3^3 * w * G(w^3)^2 + "
        "35 * y4^2 * w^3 * G(w^4)"
    ),
}

GOLDEN_CUBIC = {
    3: "1 * w^3",
    5: "10 * w^2 * G(w^3)",
    7: "210 * w^2 * G(w^2 * G(w^3)) + 70 * w * G(w^3)^2",
    9: (
        "7560 * w^2 * G(w^2 * G(w^2 * G(w^3))) + 2520 * w^2 * G(w * G(w^3)^2) + "
        "5040 * w * G(w^3) * G(w^2 * G(w^3)) + 280 * G(w^3)^3"
    ),
}


@pytest.mark.parametrize("n", sorted(GOLDEN_W))
def test_build_W_golden(n):
    assert str(build_W(n)) == GOLDEN_W[n]


def test_build_W_tilde_base_cases():
    assert str(build_W_tilde(3)) == "1 * y3 * w^3"
    assert str(build_W_tilde(4)) == "1 * y4 * w^4"
    assert str(build_W_tilde(5)) == "10 * y3^2 * w^2 * G(w^3) + 1 * y5 * w^5"


@pytest.mark.parametrize("n", sorted(GOLDEN_CUBIC))
def test_build_cubic_golden(n):
    assert str(build_cubic_W(n)) == GOLDEN_CUBIC[n]


def test_build_cubic_rejects_even_orders():
    with pytest.raises(ValueError):
        build_cubic_W(4)


def _mass_tilde(n: int) -> Fraction:
    """Independent total-coefficient enumerator, recursing directly over
    composition tuples without any polynomial machinery."""
    lead = Fraction(1)
    if n <= 4:
        return lead
    return lead + _mass_w(n)


def _mass_w(n: int) -> Fraction:
    def compositions(total, parts, minima):
        if parts == 1:
            if total >= minima[0]:
                yield (total,)
            return
        for head in range(minima[0], total + 1):
            for tail in compositions(total - head, parts - 1, minima[1:]):
                yield (head,) + tail

    kn = min((n - 3) // 2, n // 3)
    total = Fraction(0)
    for k in range(1, kn + 1):
        for comp in compositions(n, k + 1, (max(3 - k, 0),) + (3,) * k):
            n0, rest = comp[0], comp[1:]
            piece = Fraction(factorial(n), factorial(k) * factorial(n0))
            for nl in rest:
                piece *= _mass_tilde(nl) / factorial(nl)
            total += piece
    return total


@pytest.mark.parametrize("n", range(5, 10))
def test_total_coefficient_mass_vs_enumerator(n):
    mass = sum(t.coeff for t in build_W(n).terms)
    assert mass == _mass_w(n)


def _duhamel_child_degrees(expr, out):
    if isinstance(expr, WPower):
        return
    if isinstance(expr, Duhamel):
        out.append(w_degree(expr.child))
        _duhamel_child_degrees(expr.child, out)
        return
    for f in expr.factors:
        _duhamel_child_degrees(f, out)


@pytest.mark.parametrize("n", range(5, 10))
def test_index_bounds(n):
    poly = build_W(n)
    for term in poly.terms:
        for var, _ in term.monomial:
            assert 3 <= var <= n - 2
        assert w_degree(term.expr) == n
        degrees = []
        _duhamel_child_degrees(term.expr, degrees)
        assert degrees, "every correction term carries a retarded integral"
        for d in degrees:
            assert 3 <= d <= n - 2


@pytest.mark.parametrize("n", range(3, 10))
def test_tilde_terms_are_homogeneous(n):
    for term in build_W_tilde(n).terms:
        assert w_degree(term.expr) == n


@pytest.mark.parametrize("n", [5, 7, 9])
def test_appendix_identity_odd(n):
    # W~_n[a, 0, .., 0] = a^((n-1)/2) * C_n with a kept formal
    zeroed = build_W_tilde(n).substitute({m: 0 for m in range(4, n + 1)})
    power = (n - 1) // 2
    expected = WPolynomial.of(
        WTerm(t.coeff, ((3, power),), t.expr) for t in build_cubic_W(n).terms
    )
    assert zeroed == expected


@pytest.mark.parametrize("n", [4, 6, 8])
def test_appendix_identity_even(n):
    zeroed = build_W_tilde(n).substitute({m: 0 for m in range(4, n + 1)})
    assert zeroed == WPolynomial.zero()


def test_specialize_all_zero_kills_W():
    for n in (5, 6, 7):
        poly = specialize(build_W(n), {m: 0 for m in range(3, n - 1)})
        assert poly == WPolynomial.zero()


def test_specialize_w5_numeric():
    poly = specialize(build_W(5), {3: 2})
    assert len(poly.terms) == 1
    term = poly.terms[0]
    assert term.coeff == 40  # 10 * 2^2
    assert term.monomial == ()
    assert term.expr == product([WPower(2), Duhamel(WPower(3))])


def test_specialize_missing_values():
    with pytest.raises(ValueError, match="missing values"):
        specialize(build_W(7), {3: 1.0})


def test_product_canonicalization():
    w2 = WPower(2)
    g = Duhamel(WPower(3))
    assert product([WPower(0)]) == WPower(0)
    assert product([w2, WPower(1)]) == WPower(3)
    nested = product([product([w2, g]), g])
    assert nested == Product((WPower(2), Duhamel(WPower(3)), Duhamel(WPower(3))))
    assert product([g]) == g


def test_evaluate_empty_sum(grid, window, probe):
    out = evaluate(WPolynomial.zero(), probe, window)
    assert np.all(out.frames == 0.0)


def test_evaluate_rejects_formal_variables(grid, window, probe):
    with pytest.raises(ValueError, match="formal variables"):
        evaluate(build_W(5), probe, window)


def test_evaluate_w_power_one(grid, window, probe):
    poly = WPolynomial.of([WTerm(Fraction(1), (), WPower(1))])
    out = evaluate(poly, probe, window)
    w = free_series(probe, window)
    # top-level mask is the only deviation from the raw free wave
    np.testing.assert_allclose(out.frames, dealias(grid, w.frames), atol=1e-13)


def test_evaluate_w5_matches_hand_composition(grid, window, probe):
    poly = specialize(build_W(5), {3: 1})
    out = evaluate(poly, probe, window)
    w = free_series(probe, window).frames
    inner = duhamel(FieldSeries(grid, window, dealias(grid, w**3))).frames
    by_hand = dealias(grid, 10.0 * w**2 * inner)
    scale = np.max(np.abs(by_hand))
    assert np.max(np.abs(out.frames - by_hand)) <= 1e-12 * scale


def test_build_A_zero_spec(grid, window, probe):
    for n in (0, 1, 2):
        out = build_A(n, probe, 0.1, ZeroNonlinearity(), window)
        assert np.all(out.frames == 0.0)


def test_build_A_level0_is_masked_nonlinearity(grid, window, probe):
    spec = cubic(1)
    lam = 0.07
    out = build_A(0, probe, lam, spec, window)
    w = free_series(lam * probe, window)
    expected = spec.apply_to(0, w)
    np.testing.assert_allclose(out.frames, expected.frames, atol=1e-15)


def test_build_A_level1_matches_hand_composition(grid, window, probe):
    spec = cubic(1)
    lam = 0.07
    out = build_A(1, probe, lam, spec, window)
    w = free_series(lam * probe, window)
    a0_raw = spec.derivative_array(0, w.frames)
    a0 = dealias(grid, a0_raw)
    gamma = duhamel(FieldSeries(grid, window, a0)).frames
    by_hand = dealias(grid, a0_raw + spec.derivative_array(1, w.frames) * gamma)
    scale = np.max(np.abs(by_hand))
    assert np.max(np.abs(out.frames - by_hand)) <= 1e-12 * scale


def test_picard_series_matches_symbolic_tables(grid, window, probe):
    # anti-drift identity: lambda^n coefficient of the series propagator
    # equals the specialized correction polynomial divided by n!
    spec = PolynomialNonlinearity((Fraction(1), Fraction(1, 2), Fraction(1, 3)))
    values = {m: spec.exact_taylor(m) for m in range(3, 8)}
    f_series, _ = picard_series(spec, probe, window, order=5)
    for n in range(3, 6):
        expected = evaluate(specialize(build_W_tilde(n), values), probe, window)
        scale = np.max(np.abs(expected.frames))
        gap = np.max(np.abs(f_series[n] - expected.frames / factorial(n)))
        assert gap <= 1e-9 * scale / factorial(n) or gap <= 1e-12 * scale


def test_picard_series_rejects_low_order(grid, window, probe):
    with pytest.raises(ValueError):
        picard_series(cubic(1), probe, window, order=2)
