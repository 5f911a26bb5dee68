"""Directional derivatives of the scattering map at the origin.

Closed forms from the correction polynomials (identity at order 1, zero
at order 2, the output integral of the specialized polynomial at orders
three and up) cross-validated against one-sided finite differences of
the solver's scattering map along a probe direction. The cubic-only
family admits an explicit odd-order recursion whose scaling in the
cubic coupling is a^((N-1)/2).
"""

from __future__ import annotations

from math import comb

from .fields import StateH, TimeWindow, output_integral
from .nonlinearity import Nonlinearity
from .scattering import DEFAULT_MAX_ITER, DEFAULT_TOLERANCE, scattering_map
from .terms import build_cubic_W, build_W_tilde, evaluate, specialize

__all__ = ["gateaux_formula", "gateaux_numeric", "cubic_differential"]


def gateaux_formula(
    n: int, state: StateH, spec: Nonlinearity, window: TimeWindow
) -> StateH:
    """Closed-form n-th directional differential of the scattering map at 0
    along ``state``: the probe itself (n = 1), zero (n = 2), and for
    n >= 3 the windowed output integral of the correction polynomial
    specialized at the true Taylor coefficients of the nonlinearity."""
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    if n == 1:
        return state
    if n == 2:
        return StateH.zero(state.grid)
    values = {m: spec.taylor_coefficient(m) for m in range(3, n + 1)}
    poly = specialize(build_W_tilde(n), values)
    return output_integral(evaluate(poly, state, window))


def gateaux_numeric(
    n: int,
    state: StateH,
    spec: Nonlinearity,
    window: TimeWindow,
    lam: float,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
) -> StateH:
    """One-sided finite-difference differential: lam^-n sum_m C(n,m)
    (-1)^(n-m) S((m+1) lam state), sharing the difference operator used
    by the reconstruction estimators."""
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    acc = StateH.zero(state.grid)
    for m in range(n + 1):
        phi_plus, _ = scattering_map(
            (m + 1) * lam * state, spec, window, tolerance, max_iter
        )
        acc = acc + (comb(n, m) * (-1) ** (n - m)) * phi_plus
    return lam ** (-n) * acc


def cubic_differential(
    n: int, a: float, state: StateH, window: TimeWindow
) -> StateH:
    """Odd-order differential for the pure cubic family with coupling a
    (nonlinearity a*y^3/6): a^((n-1)/2) times the output integral of the
    cubic correction term."""
    if n < 3 or n % 2 == 0:
        raise ValueError(f"cubic differential requires odd n >= 3, got {n}")
    series = evaluate(build_cubic_W(n), state, window)
    return float(a) ** ((n - 1) // 2) * output_integral(series)
