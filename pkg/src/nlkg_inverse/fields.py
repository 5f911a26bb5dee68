"""Discrete fields and the spectral operator algebra on a periodic box.

Everything here is diagonal in Fourier space: the multiplier omega =
sqrt(1 - Laplacian) with symbol sqrt(1 + |k|^2), the free Klein-Gordon
propagator, and the retarded Duhamel integral. Real fields are kept in
physical space and transformed with rfft2/irfft2; all multiplier tables
are cached per grid/window and read-only afterwards, so concurrent use
on distinct data is safe.

Time integrals use the composite trapezoid rule on the uniform lattice
t_j = -T + j*dt. The 2/3-rule dealias mask is part of the discrete
algebra: it is applied to every nonlinearity output (the objects that
feed the Duhamel operator and the space-time pairings), never inside
raw pointwise powers, so that polynomial identities between the solver
and the symbolic term evaluation hold to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

__all__ = [
    "Grid2D",
    "TimeWindow",
    "StateH",
    "FieldSeries",
    "gaussian_state",
    "random_state",
    "apply_omega_power",
    "dealias",
    "pointwise_product",
    "free_propagate",
    "free_series",
    "duhamel",
    "output_integral",
    "inner_product_H",
    "h_norm",
    "pairing_spacetime",
    "l2_norm",
]


@dataclass(frozen=True)
class Grid2D:
    """Periodic square grid: ``points_per_dim`` samples per side of a box
    with period ``box_length`` in each dimension."""

    points_per_dim: int
    box_length: float

    def __post_init__(self):
        n = self.points_per_dim
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"points_per_dim must be a power of two >= 8, got {n}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")

    @property
    def shape(self) -> tuple[int, int]:
        n = self.points_per_dim
        return (n, n)

    @property
    def cell_area(self) -> float:
        return (self.box_length / self.points_per_dim) ** 2

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (x1, x2) with the box centered at the origin."""
        n, length = self.points_per_dim, self.box_length
        axis = -0.5 * length + length / n * np.arange(n)
        return tuple(np.meshgrid(axis, axis, indexing="ij"))

    @cached_property
    def _k_squared(self) -> np.ndarray:
        # rfft2 layout: full fftfreq along axis 0, rfftfreq along axis 1
        n, length = self.points_per_dim, self.box_length
        kx = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
        ky = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
        return kx[:, None] ** 2 + ky[None, :] ** 2

    @cached_property
    def omega(self) -> np.ndarray:
        """Symbol of sqrt(1 - Laplacian) on the rfft2 layout."""
        return np.sqrt(1.0 + self._k_squared)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        # 2/3 rule: keep |mode| <= n//3 in each dimension
        n = self.points_per_dim
        keep = n // 3
        mx = np.abs(np.fft.fftfreq(n, d=1.0 / n)) <= keep
        my = np.abs(np.fft.rfftfreq(n, d=1.0 / n)) <= keep
        return mx[:, None] & my[None, :]

    def rfft(self, field: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(field)

    def irfft(self, spec: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(spec, s=self.shape)


@dataclass(frozen=True)
class TimeWindow:
    """Uniform time lattice t_j = -T + j*dt on [-T, T], dt = 2T/steps."""

    half_width: float
    steps: int

    def __post_init__(self):
        if self.steps < 8 or self.steps % 2 != 0:
            raise ValueError(f"steps must be an even integer >= 8, got {self.steps}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    @property
    def dt(self) -> float:
        return 2.0 * self.half_width / self.steps

    @property
    def frame_count(self) -> int:
        return self.steps + 1

    @cached_property
    def times(self) -> np.ndarray:
        return -self.half_width + self.dt * np.arange(self.steps + 1)

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.steps + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w


def _as_finite(values: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class StateH:
    """Cauchy pair (f, g) on a grid: position component f (H^1 role) and
    velocity component g (L^2 role)."""

    grid: Grid2D
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        f = _as_finite(self.f, "StateH.f")
        g = _as_finite(self.g, "StateH.g")
        if f.shape != self.grid.shape or g.shape != self.grid.shape:
            raise ValueError("StateH components must match the grid shape")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    @classmethod
    def zero(cls, grid: Grid2D) -> "StateH":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    def __add__(self, other: "StateH") -> "StateH":
        _check_grid(self.grid, other.grid)
        return StateH(self.grid, self.f + other.f, self.g + other.g)

    def __sub__(self, other: "StateH") -> "StateH":
        _check_grid(self.grid, other.grid)
        return StateH(self.grid, self.f - other.f, self.g - other.g)

    def __mul__(self, scalar: float) -> "StateH":
        return StateH(self.grid, scalar * self.f, scalar * self.g)

    __rmul__ = __mul__

    def __neg__(self) -> "StateH":
        return self * -1.0


@dataclass(frozen=True, eq=False)
class FieldSeries:
    """Real scalar field sampled on the space-time lattice: one frame per
    window time, all frames on one grid."""

    grid: Grid2D
    window: TimeWindow
    frames: np.ndarray  # shape (steps+1, n, n)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        expected = (self.window.frame_count,) + self.grid.shape
        if frames.shape != expected:
            raise ValueError(f"frames must have shape {expected}, got {frames.shape}")
        object.__setattr__(self, "frames", frames)

    @classmethod
    def zero(cls, grid: Grid2D, window: TimeWindow) -> "FieldSeries":
        return cls(grid, window, np.zeros((window.frame_count,) + grid.shape))

    def __add__(self, other: "FieldSeries") -> "FieldSeries":
        _check_lattice(self, other)
        return FieldSeries(self.grid, self.window, self.frames + other.frames)

    def __sub__(self, other: "FieldSeries") -> "FieldSeries":
        _check_lattice(self, other)
        return FieldSeries(self.grid, self.window, self.frames - other.frames)

    def __mul__(self, scalar: float) -> "FieldSeries":
        return FieldSeries(self.grid, self.window, scalar * self.frames)

    __rmul__ = __mul__

    def __pow__(self, m: int) -> "FieldSeries":
        """Raw pointwise power, no dealiasing (see module docstring)."""
        return FieldSeries(self.grid, self.window, self.frames**m)


def _check_grid(a: Grid2D, b: Grid2D) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def _check_lattice(a: FieldSeries, b: FieldSeries) -> None:
    _check_grid(a.grid, b.grid)
    if a.window != b.window:
        raise ValueError(f"window mismatch: {a.window} vs {b.window}")


# -- probe states -----------------------------------------------------------


def gaussian_state(
    grid: Grid2D, amplitude: float = 1.0, sigma_fraction: float = 1.0 / 16.0
) -> StateH:
    """Default probe: f = amplitude * exp(-|x|^2 / (2 sigma^2)) centered in
    the box with sigma = sigma_fraction * box_length, g = 0."""
    sigma = sigma_fraction * grid.box_length
    x1, x2 = grid.coordinates
    f = amplitude * np.exp(-(x1**2 + x2**2) / (2.0 * sigma**2))
    return StateH(grid, f, np.zeros(grid.shape))


def random_state(grid: Grid2D, rng: np.random.Generator, amplitude: float = 1.0) -> StateH:
    """Band-limited random state with both components, scaled so the
    energy norm equals ``amplitude``. Deterministic given the generator."""
    n = grid.points_per_dim
    band = max(2, n // 4)

    def one_field():
        spec = np.zeros((n, n // 2 + 1), dtype=complex)
        modes = np.abs(np.fft.fftfreq(n, d=1.0 / n))
        keep_x = modes <= band
        keep_y = np.abs(np.fft.rfftfreq(n, d=1.0 / n)) <= band
        shape = (int(keep_x.sum()), int(keep_y.sum()))
        vals = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        spec[np.ix_(keep_x, keep_y)] = vals
        return grid.irfft(spec)

    state = StateH(grid, one_field(), one_field())
    norm = h_norm(state)
    if norm == 0.0:
        return state
    return state * (amplitude / norm)


# -- spectral operators -----------------------------------------------------


def apply_omega_power(grid: Grid2D, field: np.ndarray, s: float) -> np.ndarray:
    """Scale each Fourier mode by (1 + |k|^2)^(s/2). Output is real."""
    field = _as_finite(field, "field")
    return grid.irfft(grid.rfft(field) * grid.omega**s)


def dealias(grid: Grid2D, values: np.ndarray) -> np.ndarray:
    """Apply the 2/3-rule spectral mask (per frame for stacked arrays)."""
    spec = np.fft.rfft2(values, axes=(-2, -1))
    spec *= grid.dealias_mask
    return np.fft.irfft2(spec, s=grid.shape, axes=(-2, -1))


def dealias_series(series: FieldSeries) -> FieldSeries:
    return FieldSeries(series.grid, series.window, dealias(series.grid, series.frames))


def pointwise_product(a, b, dealiased: bool = True):
    """Frame-wise product of two fields or series. By default the 2/3-rule
    mask is applied to the result; pass ``dealiased=False`` for the raw
    grid product (used inside composite pointwise evaluations)."""
    if isinstance(a, FieldSeries) and isinstance(b, FieldSeries):
        _check_lattice(a, b)
        raw = a.frames * b.frames
        out = dealias(a.grid, raw) if dealiased else raw
        return FieldSeries(a.grid, a.window, out)
    if isinstance(a, FieldSeries) or isinstance(b, FieldSeries):
        series, field = (a, b) if isinstance(a, FieldSeries) else (b, a)
        raw = series.frames * np.asarray(field, dtype=float)
        out = dealias(series.grid, raw) if dealiased else raw
        return FieldSeries(series.grid, series.window, out)
    raw = np.asarray(a, dtype=float) * np.asarray(b, dtype=float)
    if dealiased:
        raise ValueError("bare-array product needs a grid; use dealias() explicitly")
    return raw


@lru_cache(maxsize=16)
def _trig_tables(grid: Grid2D, window: TimeWindow) -> tuple[np.ndarray, np.ndarray]:
    """cos(t_j * omega), sin(t_j * omega) for all lattice times; read-only."""
    phase = window.times[:, None, None] * grid.omega[None, :, :]
    cos_t, sin_t = np.cos(phase), np.sin(phase)
    cos_t.setflags(write=False)
    sin_t.setflags(write=False)
    return cos_t, sin_t


def free_propagate(state: StateH, t: float) -> StateH:
    """Free Klein-Gordon flow: returns (w(t), dw/dt(t)) for Cauchy data
    (f, g), i.e. w(t) = cos(t w) f + sin(t w) w^{-1} g per mode."""
    grid = state.grid
    mu = grid.omega
    c, s = np.cos(t * mu), np.sin(t * mu)
    fh, gh = grid.rfft(state.f), grid.rfft(state.g)
    return StateH(
        grid,
        grid.irfft(c * fh + s / mu * gh),
        grid.irfft(-mu * s * fh + c * gh),
    )


def free_series(state: StateH, window: TimeWindow) -> FieldSeries:
    """Position component w(t_j) of the free flow on every window frame."""
    grid = state.grid
    cos_t, sin_t = _trig_tables(grid, window)
    fh, gh = grid.rfft(state.f), grid.rfft(state.g)
    spec = cos_t * fh[None] + sin_t * (gh / grid.omega)[None]
    frames = np.fft.irfft2(spec, s=grid.shape, axes=(-2, -1))
    return FieldSeries(grid, window, frames)


def duhamel(forcing: FieldSeries) -> FieldSeries:
    """Retarded Duhamel integral on the window:

        (Gamma G)(t_j) = int_{-T}^{t_j} sin((t_j - s) w) w^{-1} G(s) ds

    evaluated per mode with the composite trapezoid rule. The angle
    addition formula turns the causal convolution into two cumulative
    sums, which is algebraically identical to quadrature of the kernel.
    (Gamma G)(-T) = 0.
    """
    grid, window = forcing.grid, forcing.window
    cos_t, sin_t = _trig_tables(grid, window)
    spec = np.fft.rfft2(forcing.frames, axes=(-2, -1))

    dt = window.dt
    cos_g = cos_t * spec
    sin_g = sin_t * spec
    cum_cos = np.zeros_like(cos_g)
    cum_sin = np.zeros_like(sin_g)
    np.cumsum(0.5 * dt * (cos_g[1:] + cos_g[:-1]), axis=0, out=cum_cos[1:])
    np.cumsum(0.5 * dt * (sin_g[1:] + sin_g[:-1]), axis=0, out=cum_sin[1:])

    out = (sin_t * cum_cos - cos_t * cum_sin) / grid.omega[None]
    frames = np.fft.irfft2(out, s=grid.shape, axes=(-2, -1))
    return FieldSeries(grid, window, frames)


def output_integral(forcing: FieldSeries) -> StateH:
    """Windowed scattering output integral of a forcing G:

        int_{-T}^{T} ( -w^{-1} sin(t w) G(t), cos(t w) G(t) ) dt
    """
    grid, window = forcing.grid, forcing.window
    cos_t, sin_t = _trig_tables(grid, window)
    spec = np.fft.rfft2(forcing.frames, axes=(-2, -1))
    weights = window.trapezoid_weights[:, None, None]
    first = -np.sum(weights * sin_t * spec, axis=0) / grid.omega
    second = np.sum(weights * cos_t * spec, axis=0)
    return StateH(grid, grid.irfft(first), grid.irfft(second))


# -- inner products and norms ----------------------------------------------


def _l2_dot(grid: Grid2D, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b)) * grid.cell_area


def inner_product_H(a: StateH, b: StateH) -> float:
    """Energy inner product <w f1, w f2>_{L^2} + <g1, g2>_{L^2}."""
    _check_grid(a.grid, b.grid)
    grid = a.grid
    wf1 = apply_omega_power(grid, a.f, 1.0)
    wf2 = apply_omega_power(grid, b.f, 1.0)
    return _l2_dot(grid, wf1, wf2) + _l2_dot(grid, a.g, b.g)


def h_norm(state: StateH) -> float:
    return float(np.sqrt(max(inner_product_H(state, state), 0.0)))


def l2_norm(grid: Grid2D, field: np.ndarray) -> float:
    return float(np.sqrt(np.sum(field**2) * grid.cell_area))


def pairing_spacetime(forcing: FieldSeries, state: StateH) -> float:
    """Space-time pairing int <G(t), w_psi(t)>_{L^2} dt over the window."""
    _check_grid(forcing.grid, state.grid)
    w = free_series(state, forcing.window)
    per_frame = np.sum(forcing.frames * w.frames, axis=(1, 2)) * forcing.grid.cell_area
    return float(np.dot(forcing.window.trapezoid_weights, per_frame))


def symplectic_partner(state: StateH) -> StateH:
    """Apply the matrix (0, -w^{-2}; 1, 0): the duality partner appearing
    in the scattering pairing."""
    grid = state.grid
    return StateH(grid, -apply_omega_power(grid, state.g, -2.0), state.f)
