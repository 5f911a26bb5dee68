"""Interaction solver and the scattering pairing.

Solves u = w + Gamma N(u) on the window by fixed-point iteration and
derives the scattering output and the scalar pairing K. The smallness
regime in which the iteration contracts is not known in closed form;
instead the solver tracks its residual history and aborts explicitly
when contraction fails, so an out-of-range amplitude is a loud error
rather than a silently wrong number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from .fields import (
    FieldSeries,
    StateH,
    TimeWindow,
    duhamel,
    free_series,
    h_norm,
    inner_product_H,
    output_integral,
    pairing_spacetime,
    symplectic_partner,
)
from .nonlinearity import Nonlinearity

__all__ = [
    "SolveDiagnostics",
    "SolverError",
    "solve",
    "scattering_output",
    "scattering_map",
    "K_functional",
    "K_samples",
    "DEFAULT_TOLERANCE",
    "DEFAULT_MAX_ITER",
]

DEFAULT_TOLERANCE = 1e-11
DEFAULT_MAX_ITER = 200
# iterations allowed without net residual decrease before aborting
_STALL_LIMIT = 10


@dataclass(frozen=True)
class SolveDiagnostics:
    iterations: int
    final_residual: float
    converged: bool
    residual_history: tuple[float, ...] = field(default=())


class SolverError(RuntimeError):
    """Fixed-point iteration failed; carries the diagnostics."""

    def __init__(self, message: str, diagnostics: SolveDiagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def _sup_frame_l2(series_frames: np.ndarray, cell_area: float) -> float:
    # overflow here means divergence; the caller turns it into SolverError
    with np.errstate(over="ignore"):
        per_frame = np.sqrt(np.sum(series_frames**2, axis=(1, 2)) * cell_area)
    return float(per_frame.max())


def solve(
    phi_minus: StateH,
    spec: Nonlinearity,
    window: TimeWindow,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[FieldSeries, SolveDiagnostics]:
    """Fixed-point solve of u = w + Gamma N(u), starting from the free wave.

    The residual is the sup over frames of the L^2 update size,
    normalized by the energy norm of the input data. Convergence means
    residual <= tolerance; non-contraction or exhaustion raises
    SolverError with diagnostics attached.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    grid = phi_minus.grid
    w = free_series(phi_minus, window)
    scale = h_norm(phi_minus)
    if scale == 0.0:
        diag = SolveDiagnostics(iterations=1, final_residual=0.0, converged=True)
        return w, diag

    u = w
    history: list[float] = []
    for iteration in range(1, max_iter + 1):
        forcing = spec.apply_to(0, u)
        u_next = w + duhamel(forcing)
        residual = _sup_frame_l2(u_next.frames - u.frames, grid.cell_area) / scale
        history.append(residual)
        u = u_next
        if not np.isfinite(residual):
            raise SolverError(
                "iteration diverged (non-finite residual)",
                SolveDiagnostics(iteration, residual, False, tuple(history)),
            )
        if residual <= tolerance:
            return u, SolveDiagnostics(iteration, residual, True, tuple(history))
        if iteration >= _STALL_LIMIT and history[-1] >= history[0]:
            raise SolverError(
                f"no contraction after {iteration} iterations "
                f"(residual {residual:.3e}); amplitude likely outside the "
                "contraction regime",
                SolveDiagnostics(iteration, residual, False, tuple(history)),
            )
    raise SolverError(
        f"no convergence within {max_iter} iterations "
        f"(residual {history[-1]:.3e} > tolerance {tolerance:.1e})",
        SolveDiagnostics(max_iter, history[-1], False, tuple(history)),
    )


def scattering_output(u: FieldSeries, phi_minus: StateH, spec: Nonlinearity) -> StateH:
    """Output data: phi_minus plus the windowed output integral of N(u)."""
    return phi_minus + output_integral(spec.apply_to(0, u))


def scattering_map(
    phi_minus: StateH,
    spec: Nonlinearity,
    window: TimeWindow,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[StateH, SolveDiagnostics]:
    """Full map phi_- -> phi_+ through the interaction solve."""
    u, diag = solve(phi_minus, spec, window, tolerance, max_iter)
    return scattering_output(u, phi_minus, spec), diag


KMode = Literal["via_pairing", "via_output"]


def K_functional(
    state: StateH,
    lam: float,
    spec: Nonlinearity,
    window: TimeWindow,
    mode: KMode = "via_pairing",
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
) -> float:
    """Scattering pairing K at amplitude lam along the probe state.

    ``via_pairing`` integrates N(u) against the probe's free wave over
    the window; ``via_output`` forms the output data and pairs the
    scattering difference against the symplectic partner of the probe.
    The two agree to the discrete duality tolerance.
    """
    if lam == 0.0:
        return 0.0
    u, _ = solve(lam * state, spec, window, tolerance, max_iter)
    if mode == "via_pairing":
        return pairing_spacetime(spec.apply_to(0, u), state)
    if mode == "via_output":
        phi_plus = scattering_output(u, lam * state, spec)
        return inner_product_H(phi_plus - lam * state, symplectic_partner(state))
    raise ValueError(f"unknown K mode: {mode!r}")


def K_samples(
    state: StateH,
    lambdas: Iterable[float],
    spec: Nonlinearity,
    window: TimeWindow,
    mode: KMode = "via_pairing",
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
) -> dict[float, float]:
    """Independent K evaluations on an amplitude list; failures carry the
    offending amplitude."""
    out: dict[float, float] = {}
    for lam in lambdas:
        try:
            out[float(lam)] = K_functional(
                state, float(lam), spec, window, mode, tolerance, max_iter
            )
        except SolverError as err:
            raise SolverError(
                f"K sample failed at amplitude {lam}: {err}", err.diagnostics
            ) from err
    return out
