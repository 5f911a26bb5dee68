"""Recovery of Taylor coefficients of the nonlinearity from scattering data.

The estimators combine forward finite differences of the scattering
pairing K in the amplitude parameter with correction integrals built
from the symbolic polynomials: order n is read off as

    I_n = ( lam^-n D^n_lam K  -  corr_n ) / moment_n,

where corr_n substitutes previously recovered coefficients into the
correction polynomial and pairs it against the probe wave, and
moment_n is the space-time integral of the (dealiased) n-th power of
the probe wave against the probe. All quadratures share the discrete
algebra of the solver, so on a fixed lattice the estimates converge to
the exact Taylor coefficients with O(lam) error.

K evaluation is pluggable: by default each sample runs the interaction
solver, but any callable (probe, amplitude) -> K can be substituted,
e.g. the truncated power-series propagator used as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .fields import (
    FieldSeries,
    StateH,
    TimeWindow,
    dealias,
    free_series,
    h_norm,
    pairing_spacetime,
)
from .nonlinearity import Nonlinearity
from .scattering import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOLERANCE,
    K_functional,
    SolverError,
)
from .terms import WPolynomial, WTerm, build_W, evaluate

__all__ = [
    "ProbeRejectedError",
    "finite_difference",
    "moment",
    "default_moment_floor",
    "fit_rate",
    "RateFit",
    "OrderResult",
    "ReconstructionReport",
    "reconstruct_low",
    "reconstruct_known_lower",
    "reconstruct_recursive",
    "correction_pairings",
    "solver_k_eval",
]

KEval = Callable[[StateH, float], float]


class ProbeRejectedError(ValueError):
    """Probe moment below the configured floor at some order."""

    def __init__(self, order: int, value: float, floor: float):
        super().__init__(
            f"probe rejected at order {order}: |moment| = {abs(value):.3e} "
            f"< floor {floor:.3e}"
        )
        self.order = order
        self.value = value
        self.floor = floor


def finite_difference(samples: Mapping[float, float], n: int, lam: float) -> float:
    """Forward difference D^n_lam h = sum_m C(n,m) (-1)^(n-m) h((m+1) lam).

    Sample keys are matched exactly or within 1e-9 relative tolerance;
    missing sample points raise KeyError.
    """
    if n < 1:
        raise ValueError(f"difference order must be >= 1, got {n}")
    acc = 0.0
    for m in range(n + 1):
        point = (m + 1) * lam
        value = samples.get(point)
        if value is None:
            for key, v in samples.items():
                if abs(key - point) <= 1e-9 * max(abs(point), 1e-300):
                    value = v
                    break
        if value is None:
            raise KeyError(f"missing sample at amplitude {point}")
        acc += comb(n, m) * (-1) ** (n - m) * value
    return acc


def default_moment_floor(
    state: StateH, order: int, window: TimeWindow, scale: float = 1e-6
) -> float:
    """Floor excluding near-degenerate probes: a small fraction of the
    natural size ||phi||^(n+1) * (window length) * (box area)."""
    size = h_norm(state) ** (order + 1)
    volume = 2.0 * window.half_width * state.grid.box_length**2
    return scale * size * volume


def moment(
    state: StateH, order: int, window: TimeWindow, floor: float = 0.0
) -> float:
    """Space-time integral of w^(order+1) for the probe wave w, computed
    as the pairing of the dealiased power w^order against the probe.

    The dealiased power matches the product convention of the solver's
    discrete algebra, which keeps the lam -> 0 limit of the estimators
    exact on the lattice.
    """
    w = free_series(state, window)
    powered = FieldSeries(
        state.grid, window, dealias(state.grid, w.frames**order)
    )
    value = pairing_spacetime(powered, state)
    if floor > 0.0 and abs(value) < floor:
        raise ProbeRejectedError(order, value, floor)
    return value


@dataclass(frozen=True)
class RateFit:
    slope: float
    residual: float


def fit_rate(lambdas: Sequence[float], errors: Sequence[float]) -> RateFit:
    """Least-squares slope of log(error) against log(lambda)."""
    lams = np.asarray(lambdas, dtype=float)
    errs = np.asarray(errors, dtype=float)
    if len(lams) != len(errs):
        raise ValueError("lambda and error lists must have equal length")
    keep = errs > 0.0
    if keep.sum() < 3:
        raise ValueError("fit_rate needs at least 3 positive errors")
    x, y = np.log(lams[keep]), np.log(errs[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return RateFit(float(slope), resid)


def solver_k_eval(
    spec: Nonlinearity,
    window: TimeWindow,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
) -> KEval:
    """Default K provider: one interaction solve per (probe, amplitude)."""

    def k_eval(state: StateH, lam: float) -> float:
        return K_functional(
            state, lam, spec, window, tolerance=tolerance, max_iter=max_iter
        )

    return k_eval


@dataclass(frozen=True)
class OrderResult:
    """Per-order reconstruction data: estimates on the amplitude grid,
    optional ground truth, and the fitted convergence rate."""

    order: int
    lambdas: tuple[float, ...]
    estimates: tuple[float, ...]
    extrapolated: float
    moment_value: float
    probe_label: str
    truth: float | None = None
    abs_errors: tuple[float, ...] | None = None
    slope: float | None = None


@dataclass(frozen=True)
class ReconstructionReport:
    orders: tuple[OrderResult, ...]
    failure: str | None = None
    failure_exc: Exception | None = None

    @property
    def completed_orders(self) -> tuple[int, ...]:
        return tuple(r.order for r in self.orders)


def _richardson(lambdas: Sequence[float], estimates: Sequence[float]) -> float:
    """First-order extrapolation to lam = 0 from the two smallest points."""
    pairs = sorted(zip(lambdas, estimates))
    if len(pairs) == 1:
        return pairs[0][1]
    (l0, e0), (l1, e1) = pairs[0], pairs[1]
    return (l1 * e0 - l0 * e1) / (l1 - l0)


def _collect_samples(
    state: StateH, order: int, lambdas: Sequence[float], k_eval: KEval,
    cache: dict[float, float],
) -> dict[float, float]:
    for lam in lambdas:
        for m in range(order + 1):
            point = (m + 1) * lam
            if point not in cache:
                cache[point] = k_eval(state, point)
    return cache


Monomial = tuple[tuple[int, int], ...]


def correction_pairings(
    order: int, state: StateH, window: TimeWindow
) -> list[tuple[float, Monomial, float]]:
    """Per-term correction data for an order >= 5: (coefficient, monomial,
    space-time pairing of the term's expression against the probe).

    The pairings are amplitude-independent, so the correction at any
    amplitude is a cheap scalar polynomial in the recovered lower-order
    coefficients.
    """
    poly = build_W(order)
    out = []
    expr_cache: dict = {}
    for term in poly.terms:
        if term.expr not in expr_cache:
            unit = WPolynomial.of([WTerm(Fraction(1), (), term.expr)])
            expr_cache[term.expr] = pairing_spacetime(
                evaluate(unit, state, window), state
            )
        out.append((float(term.coeff), term.monomial, expr_cache[term.expr]))
    return out


def _correction_value(
    pairings: list[tuple[float, Monomial, float]], values: Mapping[int, float]
) -> float:
    total = 0.0
    for coeff, mono, paired in pairings:
        factor = coeff
        for var, e in mono:
            factor *= values[var] ** e
        total += factor * paired
    return total


def _estimate_order(
    order: int,
    lambdas: Sequence[float],
    samples: Mapping[float, float],
    correction: Callable[[float], float],
    moment_value: float,
) -> tuple[float, ...]:
    out = []
    for lam in lambdas:
        diff = finite_difference(samples, order, lam)
        out.append((lam ** (-order) * diff - correction(lam)) / moment_value)
    return tuple(out)


def _order_result(
    order: int,
    state: StateH,
    lambdas: Sequence[float],
    estimates: tuple[float, ...],
    moment_value: float,
    probe_label: str,
    truth: float | None,
) -> OrderResult:
    abs_errors = None
    slope = None
    if truth is not None:
        abs_errors = tuple(abs(e - truth) for e in estimates)
        if len(lambdas) >= 3:
            try:
                slope = fit_rate(lambdas, abs_errors).slope
            except ValueError:
                slope = None
    return OrderResult(
        order=order,
        lambdas=tuple(float(l) for l in lambdas),
        estimates=estimates,
        extrapolated=_richardson(lambdas, estimates),
        moment_value=moment_value,
        probe_label=probe_label,
        truth=truth,
        abs_errors=abs_errors,
        slope=slope,
    )


def reconstruct_known_lower(
    order: int,
    state: StateH,
    lambdas: Sequence[float],
    known: Mapping[int, float],
    spec: Nonlinearity,
    window: TimeWindow,
    k_eval: KEval | None = None,
    moment_floor: float | None = None,
    moment_floor_scale: float = 1e-6,
    truth: float | None = None,
    probe_label: str = "probe",
) -> OrderResult:
    """Single-order estimator with the lower Taylor coefficients supplied.

    For orders 3 and 4 the correction vanishes identically and this
    reduces to the plain finite-difference estimator.
    """
    if order < 3:
        raise ValueError(f"order must be >= 3, got {order}")
    if not lambdas:
        raise ValueError("empty amplitude grid")
    k_eval = k_eval or solver_k_eval(spec, window)
    floor = (
        default_moment_floor(state, order, window, moment_floor_scale)
        if moment_floor is None
        else moment_floor
    )
    moment_value = moment(state, order, window, floor=floor)

    if order >= 5:
        needed = build_W(order).variables()
        missing = needed - set(known)
        if missing:
            raise ValueError(f"missing known coefficients {sorted(missing)}")
        pairings = correction_pairings(order, state, window)
        fixed = _correction_value(pairings, known)
        correction = lambda lam: fixed
    else:
        correction = lambda lam: 0.0

    samples = _collect_samples(state, order, lambdas, k_eval, {})
    estimates = _estimate_order(order, lambdas, samples, correction, moment_value)
    return _order_result(
        order, state, lambdas, estimates, moment_value, probe_label, truth
    )


def reconstruct_low(
    order: int,
    state: StateH,
    lambdas: Sequence[float],
    spec: Nonlinearity,
    window: TimeWindow,
    **kwargs,
) -> OrderResult:
    """Orders 3 and 4: plain finite-difference estimator, no correction."""
    if order not in (3, 4):
        raise ValueError(f"reconstruct_low handles orders 3 and 4, got {order}")
    return reconstruct_known_lower(order, state, lambdas, {}, spec, window, **kwargs)


def reconstruct_recursive(
    orders: Iterable[int],
    probes: Union[StateH, Mapping[int, StateH]],
    lambdas: Sequence[float],
    spec: Nonlinearity,
    window: TimeWindow,
    k_eval: KEval | None = None,
    moment_floor: float | None = None,
    moment_floor_scale: float = 1e-6,
    blind: bool = False,
    probe_label: str = "probe",
) -> ReconstructionReport:
    """Fully recursive cascade: each order's correction substitutes the
    estimates already recovered at the same amplitude, no ground truth
    consumed. Orders are processed in increasing order; a solve or probe
    failure at some order truncates the cascade there and the report
    records the completed orders together with the failure.
    """
    order_list = sorted(set(int(n) for n in orders))
    if not order_list or order_list[0] < 3:
        raise ValueError("orders must be a non-empty collection of integers >= 3")
    if not lambdas:
        raise ValueError("empty amplitude grid")
    k_eval = k_eval or solver_k_eval(spec, window)

    def probe_for(n: int) -> StateH:
        if isinstance(probes, StateH):
            return probes
        return probes[n]

    results: list[OrderResult] = []
    estimates_by_order: dict[int, dict[float, float]] = {}
    sample_cache: dict[int, dict[float, float]] = {}  # id-keyed per probe
    failure = None
    failure_exc = None

    for n in order_list:
        state = probe_for(n)
        try:
            floor = (
                default_moment_floor(state, n, window, moment_floor_scale)
                if moment_floor is None
                else moment_floor
            )
            moment_value = moment(state, n, window, floor=floor)

            if n >= 5:
                needed = build_W(n).variables()
                missing = needed - set(estimates_by_order)
                if missing:
                    raise ValueError(
                        f"order {n} needs estimates for orders {sorted(missing)}; "
                        "include them in the cascade"
                    )
                pairings = correction_pairings(n, state, window)

                def correction(lam: float, _p=pairings) -> float:
                    values = {
                        v: estimates_by_order[v][lam] for v in estimates_by_order
                    }
                    return _correction_value(_p, values)

            else:
                correction = lambda lam: 0.0

            cache = sample_cache.setdefault(id(state), {})
            samples = _collect_samples(state, n, lambdas, k_eval, cache)
            ests = _estimate_order(n, lambdas, samples, correction, moment_value)
        except (SolverError, ProbeRejectedError, ValueError) as err:
            failure = f"order {n}: {err}"
            failure_exc = err
            break

        estimates_by_order[n] = dict(zip((float(l) for l in lambdas), ests))
        truth = None if blind else spec.taylor_coefficient(n)
        results.append(
            _order_result(n, state, lambdas, ests, moment_value, probe_label, truth)
        )

    return ReconstructionReport(
        orders=tuple(results), failure=failure, failure_exc=failure_exc
    )
