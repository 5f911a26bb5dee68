"""Scattering simulation and nonlinearity reconstruction for the 2D
nonlinear Klein-Gordon equation u_tt - Lap(u) + u = N(u) on a windowed
periodic lattice."""

from .fields import (
    FieldSeries,
    Grid2D,
    StateH,
    TimeWindow,
    apply_omega_power,
    duhamel,
    free_propagate,
    free_series,
    gaussian_state,
    h_norm,
    inner_product_H,
    output_integral,
    pairing_spacetime,
    pointwise_product,
    random_state,
)
from .nonlinearity import (
    ExponentialNonlinearity,
    Nonlinearity,
    PolynomialNonlinearity,
    ZeroNonlinearity,
    cubic,
)
from .scattering import (
    K_functional,
    K_samples,
    SolveDiagnostics,
    SolverError,
    scattering_map,
    scattering_output,
    solve,
)
from .terms import (
    build_A,
    build_cubic_W,
    build_W,
    build_W_tilde,
    evaluate,
    k_max,
    picard_series,
    specialize,
)
from .reconstruction import (
    ProbeRejectedError,
    ReconstructionReport,
    finite_difference,
    fit_rate,
    moment,
    reconstruct_known_lower,
    reconstruct_low,
    reconstruct_recursive,
)
from .gateaux import cubic_differential, gateaux_formula, gateaux_numeric

__version__ = "0.1.0"
