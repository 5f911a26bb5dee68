"""Symbolic correction functionals and their numerical evaluation.

The lowest-order interaction of the scattering map is a recursion of
"correction polynomials": formal sums of terms

    coefficient * (monomial in y_3..y_N) * (DAG over w-powers, G, products)

where ``w`` stands for the free wave of the probe, ``G`` for the
retarded Duhamel integral, and y_m for the m-th Taylor coefficient of
the nonlinearity at 0. Coefficients stay exact rationals through all
symbolic manipulation and become floats only at numerical evaluation.

Also provided: the cubic-only recursion (odd orders), the truncated
expansion builder A_n, and a brute-force power-series propagator used
as an independent oracle for the symbolic tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Iterable, Mapping, Union

import numpy as np

from .fields import (
    FieldSeries,
    StateH,
    TimeWindow,
    dealias,
    duhamel,
    free_series,
    pairing_spacetime,
)
from .nonlinearity import Nonlinearity, PolynomialNonlinearity

__all__ = [
    "TermExpr",
    "WPower",
    "Duhamel",
    "Product",
    "WTerm",
    "WPolynomial",
    "k_max",
    "build_W",
    "build_W_tilde",
    "build_cubic_W",
    "specialize",
    "evaluate",
    "build_A",
    "picard_series",
]


# -- expression DAG ----------------------------------------------------------


@dataclass(frozen=True)
class WPower:
    """w^m; WPower(0) is the multiplicative unit."""

    m: int


@dataclass(frozen=True)
class Duhamel:
    """G(child): the retarded integral applied to a sub-expression."""

    child: "TermExpr"


@dataclass(frozen=True)
class Product:
    """Flattened product of at least two canonical factors."""

    factors: tuple["TermExpr", ...]


TermExpr = Union[WPower, Duhamel, Product]


def _sort_key(expr: TermExpr):
    if isinstance(expr, WPower):
        return (0, expr.m)
    if isinstance(expr, Duhamel):
        return (1, _sort_key(expr.child))
    return (2, len(expr.factors), tuple(_sort_key(f) for f in expr.factors))


def product(factors: Iterable[TermExpr]) -> TermExpr:
    """Canonical product: flatten nested products, merge w-powers, drop
    units, sort factors."""
    flat: list[TermExpr] = []
    w_total = 0
    for f in factors:
        if isinstance(f, Product):
            inner = f.factors
        else:
            inner = (f,)
        for g in inner:
            if isinstance(g, WPower):
                w_total += g.m
            else:
                flat.append(g)
    if w_total > 0:
        flat.append(WPower(w_total))
    flat.sort(key=_sort_key)
    if not flat:
        return WPower(0)
    if len(flat) == 1:
        return flat[0]
    return Product(tuple(flat))


def w_degree(expr: TermExpr) -> int:
    """Total homogeneity degree in w, counting through Duhamel nodes."""
    if isinstance(expr, WPower):
        return expr.m
    if isinstance(expr, Duhamel):
        return w_degree(expr.child)
    return sum(w_degree(f) for f in expr.factors)


def format_expr(expr: TermExpr) -> str:
    if isinstance(expr, WPower):
        if expr.m == 0:
            return "1"
        return "w" if expr.m == 1 else f"w^{expr.m}"
    if isinstance(expr, Duhamel):
        return f"G({format_expr(expr.child)})"
    parts = []
    i = 0
    factors = expr.factors
    while i < len(factors):
        j = i
        while j < len(factors) and factors[j] == factors[i]:
            j += 1
        text = format_expr(factors[i])
        parts.append(text if j - i == 1 else f"{text}^{j - i}")
        i = j
    return " * ".join(parts)


# -- polynomials over the DAG ------------------------------------------------

Monomial = tuple[tuple[int, int], ...]  # sorted ((variable index, exponent), ...)
Coeff = Union[Fraction, float]


def _monomial_mul(a: Monomial, b: Monomial) -> Monomial:
    exps: dict[int, int] = {}
    for var, e in a + b:
        exps[var] = exps.get(var, 0) + e
    return tuple(sorted(exps.items()))


def format_monomial(mono: Monomial) -> str:
    return "*".join(f"y{v}" if e == 1 else f"y{v}^{e}" for v, e in mono)


@dataclass(frozen=True)
class WTerm:
    coeff: Coeff
    monomial: Monomial
    expr: TermExpr


@dataclass(frozen=True)
class WPolynomial:
    """Canonical sum of terms; like (monomial, expr) pairs are merged and
    zero coefficients dropped."""

    terms: tuple[WTerm, ...]

    @classmethod
    def of(cls, terms: Iterable[WTerm]) -> "WPolynomial":
        acc: dict[tuple[Monomial, TermExpr], Coeff] = {}
        for t in terms:
            key = (t.monomial, t.expr)
            acc[key] = acc.get(key, Fraction(0)) + t.coeff
        kept = [WTerm(c, mono, expr) for (mono, expr), c in acc.items() if c != 0]
        kept.sort(key=lambda t: (t.monomial, _sort_key(t.expr)))
        return cls(tuple(kept))

    @classmethod
    def zero(cls) -> "WPolynomial":
        return cls(())

    def __add__(self, other: "WPolynomial") -> "WPolynomial":
        return WPolynomial.of(self.terms + other.terms)

    def __mul__(self, other: "WPolynomial") -> "WPolynomial":
        out = []
        for a in self.terms:
            for b in other.terms:
                out.append(
                    WTerm(
                        a.coeff * b.coeff,
                        _monomial_mul(a.monomial, b.monomial),
                        product([a.expr, b.expr]),
                    )
                )
        return WPolynomial.of(out)

    def scaled(self, c: Coeff) -> "WPolynomial":
        return WPolynomial.of(WTerm(t.coeff * c, t.monomial, t.expr) for t in self.terms)

    def wrapped_in_duhamel(self) -> "WPolynomial":
        """G applied termwise (the integral is linear)."""
        return WPolynomial.of(
            WTerm(t.coeff, t.monomial, Duhamel(t.expr)) for t in self.terms
        )

    def variables(self) -> set[int]:
        return {v for t in self.terms for v, _ in t.monomial}

    def substitute(self, values: Mapping[int, Coeff]) -> "WPolynomial":
        """Substitute numbers for a subset of variables; the rest stay
        formal. Exact when values are rationals."""
        out = []
        for t in self.terms:
            coeff: Coeff = t.coeff
            rest = []
            for var, e in t.monomial:
                if var in values:
                    coeff = coeff * values[var] ** e
                else:
                    rest.append((var, e))
            out.append(WTerm(coeff, tuple(rest), t.expr))
        return WPolynomial.of(out)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for t in self.terms:
            coeff = t.coeff
            pieces = [str(coeff) if isinstance(coeff, Fraction) else repr(coeff)]
            if t.monomial:
                pieces.append(format_monomial(t.monomial))
            pieces.append(format_expr(t.expr))
            parts.append(" * ".join(pieces))
        return " + ".join(parts)


def specialize(poly: WPolynomial, values: Mapping[int, Coeff]) -> WPolynomial:
    """Substitute numbers for every variable; raises on missing values."""
    missing = poly.variables() - set(values)
    if missing:
        raise ValueError(f"missing values for variables {sorted(missing)}")
    return poly.substitute(values)


# -- the correction recursion ------------------------------------------------


def k_max(n: int) -> int:
    """Largest k with (3-k)_+ + 3k <= n: min((n-3)//2, n//3)."""
    if n < 5:
        raise ValueError(f"k_max requires n >= 5, got {n}")
    return min((n - 3) // 2, n // 3)


def _compositions(total: int, parts: int, minima: tuple[int, ...]):
    """Ordered tuples (a_1..a_parts) with a_i >= minima[i], sum = total."""
    if parts == 1:
        if total >= minima[0]:
            yield (total,)
        return
    for head in range(minima[0], total + 1):
        for tail in _compositions(total - head, parts - 1, minima[1:]):
            yield (head,) + tail


@lru_cache(maxsize=None)
def build_W_tilde(n: int) -> WPolynomial:
    """Full correction polynomial: y_n w^n plus the lower-order part."""
    if n < 3:
        raise ValueError(f"build_W_tilde requires n >= 3, got {n}")
    lead = WPolynomial.of([WTerm(Fraction(1), ((n, 1),), WPower(n))])
    if n <= 4:
        return lead
    return lead + build_W(n)


@lru_cache(maxsize=None)
def build_W(n: int) -> WPolynomial:
    """Lower-order correction part, a polynomial in y_3..y_{n-2} only:

        sum_{k=1}^{k_max} n!/k! sum_{N0+N1+..+Nk=n}
            y_{N0+k} w^{N0} / N0! * prod_l G(W~_{Nl}) / Nl!

    over ordered compositions with N0 >= max(3-k, 0) and Nl >= 3.
    """
    if n < 5:
        raise ValueError(f"build_W requires n >= 5, got {n}")
    total = WPolynomial.zero()
    for k in range(1, k_max(n) + 1):
        minima = (max(3 - k, 0),) + (3,) * k
        for comp in _compositions(n, k + 1, minima):
            n0, rest = comp[0], comp[1:]
            coeff = Fraction(factorial(n), factorial(k) * factorial(n0))
            head = WPolynomial.of(
                [WTerm(coeff, ((n0 + k, 1),), WPower(n0))]
            )
            piece = head
            for nl in rest:
                piece = piece * build_W_tilde(nl).wrapped_in_duhamel().scaled(
                    Fraction(1, factorial(nl))
                )
            total = total + piece
    return total


@lru_cache(maxsize=None)
def build_cubic_W(n: int) -> WPolynomial:
    """Pure-cubic correction terms at odd orders:

        C_3 = w^3,
        C_{2m+3} = sum_{k=1}^{min(m,3)} (2m+3)!/(k!(3-k)!)
                   sum_{m1+..+mk=m-k} w^{3-k} prod_l G(C_{2ml+3}) / (2ml+3)!
    """
    if n < 3 or n % 2 == 0:
        raise ValueError(f"build_cubic_W requires odd n >= 3, got {n}")
    if n == 3:
        return WPolynomial.of([WTerm(Fraction(1), (), WPower(3))])
    m = (n - 3) // 2
    total = WPolynomial.zero()
    for k in range(1, min(m, 3) + 1):
        for comp in _compositions(m - k, k, (0,) * k):
            coeff = Fraction(factorial(n), factorial(k) * factorial(3 - k))
            piece = WPolynomial.of([WTerm(coeff, (), WPower(3 - k))])
            for ml in comp:
                piece = piece * build_cubic_W(2 * ml + 3).wrapped_in_duhamel().scaled(
                    Fraction(1, factorial(2 * ml + 3))
                )
            total = total + piece
    return total


# -- numerical evaluation ----------------------------------------------------


def evaluate(poly: WPolynomial, state: StateH, window: TimeWindow) -> FieldSeries:
    """Evaluate a fully specialized polynomial on the lattice.

    Convention (matches the solver's discrete algebra): products and
    w-powers are raw pointwise operations, every Duhamel input and the
    final sum are dealiased. Repeated sub-DAGs are evaluated once.
    """
    leftover = poly.variables()
    if leftover:
        raise ValueError(f"cannot evaluate with formal variables {sorted(leftover)}")
    grid = state.grid
    w = free_series(state, window)
    cache: dict[TermExpr, np.ndarray] = {}

    def eval_expr(expr: TermExpr) -> np.ndarray:
        hit = cache.get(expr)
        if hit is not None:
            return hit
        if isinstance(expr, WPower):
            out = np.ones_like(w.frames) if expr.m == 0 else w.frames**expr.m
        elif isinstance(expr, Duhamel):
            forcing = FieldSeries(grid, window, dealias(grid, eval_expr(expr.child)))
            out = duhamel(forcing).frames
        else:
            out = eval_expr(expr.factors[0]).copy()
            for f in expr.factors[1:]:
                out *= eval_expr(f)
        cache[expr] = out
        return out

    acc = np.zeros((window.frame_count,) + grid.shape)
    for t in poly.terms:
        acc += float(t.coeff) * eval_expr(t.expr)
    return FieldSeries(grid, window, dealias(grid, acc))


def build_A(
    n: int,
    state: StateH,
    lam: float,
    spec: Nonlinearity,
    window: TimeWindow,
) -> FieldSeries:
    """Truncated expansion A_n of the interaction nonlinearity at lam*state:

        A_0 = N(w),   A_n = A_0 + sum_{k=1}^n N^(k)(w) (G A_{n-k})^k / k!

    with w the free wave of the scaled state. Returns the n-th level.
    """
    if n < 0:
        raise ValueError(f"build_A requires n >= 0, got {n}")
    grid = state.grid
    w = free_series(lam * state, window)
    base_raw = spec.derivative_array(0, w.frames)
    levels = [FieldSeries(grid, window, dealias(grid, base_raw))]
    for j in range(1, n + 1):
        acc = base_raw.copy()
        for k in range(1, j + 1):
            gamma_k = duhamel(levels[j - k]).frames
            acc += (1.0 / factorial(k)) * spec.derivative_array(k, w.frames) * gamma_k**k
        levels.append(FieldSeries(grid, window, dealias(grid, acc)))
    return levels[n]


# -- brute-force series oracle ----------------------------------------------


def _series_product(a: list, b: list, order: int) -> list:
    """Cauchy product of lambda-power series with field-array coefficients,
    truncated at ``order``. Raw grid products throughout."""
    out: list = [None] * (order + 1)
    for i, ai in enumerate(a):
        if ai is None:
            continue
        for j, bj in enumerate(b):
            if bj is None or i + j > order:
                continue
            contrib = ai * bj
            out[i + j] = contrib if out[i + j] is None else out[i + j] + contrib
    return out


def picard_series(
    spec: PolynomialNonlinearity,
    state: StateH,
    window: TimeWindow,
    order: int,
) -> tuple[list, list]:
    """Power-series Picard propagator, independent of the symbolic tables.

    Expands the interaction fixed point u = lam*w + G N(u) as a series in
    lam by iterating in series space with plain truncated-series algebra:
    powers of u come from repeated Cauchy products, N(u) from the
    monomial coefficients of the nonlinearity. Returns (F, u) where F[j]
    is the dealiased lambda^j coefficient frame stack of N(u) and u[j]
    the coefficient of the solution, both up to ``order``.
    """
    if order < 3:
        raise ValueError(f"order must be >= 3, got {order}")
    grid = state.grid
    w = free_series(state, window).frames
    coeffs = spec.monomial_coeffs

    u: list = [None] * (order + 1)
    u[1] = w
    f_series: list = [None] * (order + 1)
    # u[j] depends on F up to j, which depends on u up to j-2
    for _ in range((order + 1) // 2 + 1):
        f_series = [None] * (order + 1)
        power: list = [None] * (order + 1)
        power[0] = np.ones_like(w)
        for m in range(1, len(coeffs)):
            power = _series_product(power, u, order)
            c = coeffs[m]
            if c == 0:
                continue
            for j, pj in enumerate(power):
                if pj is None:
                    continue
                contrib = float(c) * pj
                f_series[j] = contrib if f_series[j] is None else f_series[j] + contrib
        for j in range(order + 1):
            if f_series[j] is not None:
                f_series[j] = dealias(grid, f_series[j])
        new_u: list = [None] * (order + 1)
        new_u[1] = w
        for j in range(3, order + 1):
            if f_series[j] is not None:
                forcing = FieldSeries(grid, window, f_series[j])
                new_u[j] = duhamel(forcing).frames
        u = new_u
    return f_series, u


def series_K_values(
    f_series: list,
    state: StateH,
    window: TimeWindow,
) -> dict[int, float]:
    """Taylor coefficients of the scattering pairing: order -> the
    space-time pairing of the corresponding series coefficient of N(u)
    against the probe wave."""
    out = {}
    for j, fj in enumerate(f_series):
        if fj is None:
            continue
        out[j] = pairing_spacetime(FieldSeries(state.grid, window, fj), state)
    return out
