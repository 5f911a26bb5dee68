"""Closed families of admissible nonlinearities with exact derivatives.

Two concrete families plus the zero map:

* polynomial:   N(y) = P(y) * y^3 for a polynomial P,
* exponential:  N(y) = c1 * (exp(c2 * y^2) - 1) * y with c2 >= 0.

Both vanish to second order at the origin, so the first nontrivial
Taylor coefficient is N'''(0). Derivatives are closed-form (polynomial
coefficient shifts, and a Hermite-style recurrence for the exponential
family), never numerical - the reconstruction tests need exact targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Union

import numpy as np

from .fields import FieldSeries, Grid2D, dealias

__all__ = [
    "Nonlinearity",
    "PolynomialNonlinearity",
    "ExponentialNonlinearity",
    "ZeroNonlinearity",
    "cubic",
    "nonlinearity_from_config",
]

Number = Union[int, float, Fraction]


class Nonlinearity:
    """Common interface: exact k-th derivatives and Taylor coefficients."""

    max_derivative_order: int

    def _check_order(self, k: int) -> None:
        if not 0 <= k <= self.max_derivative_order:
            raise ValueError(
                f"derivative order {k} outside [0, {self.max_derivative_order}]"
            )

    def derivative(self, k: int, y: float) -> float:
        """Exact k-th derivative N^(k)(y)."""
        raise NotImplementedError

    def derivative_array(self, k: int, values: np.ndarray) -> np.ndarray:
        """Vectorized N^(k) on raw grid values (no mask)."""
        raise NotImplementedError

    def taylor_coefficient(self, n: int) -> float:
        """Exact N^(n)(0) for n >= 3."""
        if n < 3:
            raise ValueError(f"taylor_coefficient needs n >= 3, got {n}")
        self._check_order(n)
        return self.derivative(n, 0.0)

    def apply_to(self, k: int, series_or_field, grid: Grid2D | None = None):
        """Pointwise N^(k) followed by the dealias mask (the nonlinearity
        output convention of the discrete algebra)."""
        self._check_order(k)
        if isinstance(series_or_field, FieldSeries):
            out = dealias(
                series_or_field.grid, self.derivative_array(k, series_or_field.frames)
            )
            return FieldSeries(series_or_field.grid, series_or_field.window, out)
        if grid is None:
            raise ValueError("grid required for bare-array application")
        return dealias(grid, self.derivative_array(k, np.asarray(series_or_field)))


@dataclass(frozen=True)
class ZeroNonlinearity(Nonlinearity):
    """N = 0 (linear equation)."""

    max_derivative_order: int = 12

    def derivative(self, k: int, y: float) -> float:
        self._check_order(k)
        return 0.0

    def derivative_array(self, k: int, values: np.ndarray) -> np.ndarray:
        self._check_order(k)
        return np.zeros_like(np.asarray(values, dtype=float))


@dataclass(frozen=True)
class PolynomialNonlinearity(Nonlinearity):
    """N(y) = P(y) * y^3 with P given by ``p_coeffs`` (ascending powers).

    Coefficients are kept as exact rationals; evaluation converts to
    float. N^(n)(0) = n! * p_{n-3}.
    """

    p_coeffs: tuple[Fraction, ...]
    max_derivative_order: int = 12

    def __post_init__(self):
        coeffs = tuple(Fraction(c) for c in self.p_coeffs)
        if not coeffs:
            raise ValueError("p_coeffs must be non-empty")
        object.__setattr__(self, "p_coeffs", coeffs)

    @property
    def monomial_coeffs(self) -> tuple[Fraction, ...]:
        """Coefficients c_m of N(y) = sum_m c_m y^m (c_0 = c_1 = c_2 = 0)."""
        return (Fraction(0),) * 3 + self.p_coeffs

    def _derivative_coeffs(self, k: int) -> list[float]:
        coeffs = self.monomial_coeffs
        out = []
        for m in range(k, len(coeffs)):
            out.append(float(coeffs[m] * (factorial(m) // factorial(m - k))))
        return out

    def derivative(self, k: int, y: float) -> float:
        self._check_order(k)
        acc = 0.0
        for c in reversed(self._derivative_coeffs(k)):
            acc = acc * y + c
        return acc

    def derivative_array(self, k: int, values: np.ndarray) -> np.ndarray:
        self._check_order(k)
        values = np.asarray(values, dtype=float)
        acc = np.zeros_like(values)
        for c in reversed(self._derivative_coeffs(k)):
            acc = acc * values + c
        return acc

    def taylor_coefficient(self, n: int) -> float:
        if n < 3:
            raise ValueError(f"taylor_coefficient needs n >= 3, got {n}")
        self._check_order(n)
        coeffs = self.monomial_coeffs
        if n >= len(coeffs):
            return 0.0
        return float(coeffs[n] * factorial(n))

    def exact_taylor(self, n: int) -> Fraction:
        """Rational N^(n)(0), used by the symbolic/series oracles."""
        coeffs = self.monomial_coeffs
        if n >= len(coeffs):
            return Fraction(0)
        return coeffs[n] * factorial(n)


def _exp_derivative_polys(c2: Fraction, order: int) -> list[list[Fraction]]:
    """Q_k with d^k/dy^k (y * exp(c2 y^2)) = Q_k(y) exp(c2 y^2), via
    Q_{k+1} = Q_k' + 2 c2 y Q_k. Coefficient lists in ascending powers."""
    polys = [[Fraction(0), Fraction(1)]]  # Q_0 = y
    for _ in range(order):
        q = polys[-1]
        nxt = [Fraction(0)] * (len(q) + 1)
        for j, c in enumerate(q):
            if j >= 1:
                nxt[j - 1] += j * c
            nxt[j + 1] += 2 * c2 * c
        polys.append(nxt)
    return polys


@dataclass(frozen=True)
class ExponentialNonlinearity(Nonlinearity):
    """N(y) = c1 * (exp(c2 y^2) - 1) * y, c2 >= 0.

    N'''(0) = 6 c1 c2 and N^(5)(0) = 60 c1 c2^2, so both parameters are
    recoverable from the first two odd Taylor coefficients.
    """

    c1: float
    c2: float
    max_derivative_order: int = 12
    _q_polys: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.c2 < 0:
            raise ValueError(f"c2 must be >= 0, got {self.c2}")
        polys = _exp_derivative_polys(Fraction(self.c2), self.max_derivative_order)
        object.__setattr__(self, "_q_polys", tuple(tuple(p) for p in polys))

    def derivative(self, k: int, y: float) -> float:
        return float(self.derivative_array(k, np.asarray([y], dtype=float))[0])

    def derivative_array(self, k: int, values: np.ndarray) -> np.ndarray:
        self._check_order(k)
        y = np.asarray(values, dtype=float)
        q = np.zeros_like(y)
        for c in reversed(self._q_polys[k]):
            q = q * y + float(c)
        out = self.c1 * q * np.exp(self.c2 * y**2)
        # subtract the derivative of the linear part -c1*y
        if k == 0:
            out = out - self.c1 * y
        elif k == 1:
            out = out - self.c1
        return out

    def exact_taylor(self, n: int) -> Fraction:
        q0 = self._q_polys[n][0] if self._q_polys[n] else Fraction(0)
        val = Fraction(self.c1) * q0
        if n == 1:
            val -= Fraction(self.c1)
        return val


def cubic(scale: Number = 1) -> PolynomialNonlinearity:
    """N(y) = scale * y^3."""
    return PolynomialNonlinearity((Fraction(scale),))


def nonlinearity_from_config(cfg: dict) -> Nonlinearity:
    """Build a nonlinearity from a validated configuration mapping."""
    kind = cfg.get("kind")
    order = int(cfg.get("max_derivative_order", 12))
    if kind == "zero":
        return ZeroNonlinearity(max_derivative_order=order)
    if kind == "polynomial":
        coeffs = tuple(
            Fraction(c).limit_denominator(10**12) if isinstance(c, float) else Fraction(c)
            for c in cfg["p_coeffs"]
        )
        return PolynomialNonlinearity(coeffs, max_derivative_order=order)
    if kind == "exponential":
        return ExponentialNonlinearity(
            float(cfg["c1"]), float(cfg["c2"]), max_derivative_order=order
        )
    raise ValueError(f"unknown nonlinearity kind: {kind!r}")
