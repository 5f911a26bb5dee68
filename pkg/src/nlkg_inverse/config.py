"""Run configuration: a strict, nested key/value schema.

Configs are TOML files (JSON accepted as an alternative encoding of the
same schema). Validation is strict: unknown keys anywhere are rejected,
so typos fail loudly instead of silently running defaults. Every loaded
config resolves to plain dataclasses plus a ``resolved()`` dictionary
that result files embed for provenance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .fields import Grid2D, StateH, TimeWindow, gaussian_state, random_state
from .nonlinearity import Nonlinearity, nonlinearity_from_config

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Invalid configuration file or schema violation."""


def _section(data: Mapping, name: str, required: bool = True) -> dict:
    value = data.get(name)
    if value is None:
        if required:
            raise ConfigError(f"missing required section [{name}]")
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"section [{name}] must be a table/object")
    return dict(value)


def _check_keys(data: Mapping, allowed: set[str], context: str) -> None:
    extra = set(data) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {context}: {sorted(extra)}")


def _get(data: dict, key: str, kind, default=None, required: bool = False):
    if key not in data:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    value = data[key]
    try:
        return kind(value)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad value for {key!r}: {value!r} ({err})") from err


@dataclass(frozen=True)
class ProbeConfig:
    kind: str = "gaussian"
    amplitude: float = 1.0
    sigma_fraction: float = 1.0 / 16.0

    def build(self, grid: Grid2D, seed: int) -> StateH:
        if self.kind == "gaussian":
            return gaussian_state(grid, self.amplitude, self.sigma_fraction)
        if self.kind == "random":
            rng = np.random.default_rng(seed)
            return random_state(grid, rng, self.amplitude)
        raise ConfigError(f"unknown probe kind: {self.kind!r}")


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-11
    max_iter: int = 200
    amplitude_guard: float = 0.5


@dataclass(frozen=True)
class ReconstructConfig:
    orders: tuple[int, ...] = (3,)
    mode: str = "recursive"  # recursive | known_lower | low
    known: dict[int, float] = field(default_factory=dict)
    blind: bool = False
    moment_floor_scale: float = 1e-6


@dataclass(frozen=True)
class GateauxConfig:
    orders: tuple[int, ...] = (1, 2, 3)
    lambda_base: float | None = None
    count: int | None = None
    ratio: float | None = None


@dataclass(frozen=True)
class RunConfig:
    grid: Grid2D
    window: TimeWindow
    nonlinearity_cfg: dict
    probe: ProbeConfig
    lambdas: tuple[float, ...]
    solver: SolverConfig
    reconstruct: ReconstructConfig
    gateaux: GateauxConfig
    simulate_lambdas: tuple[float, ...]
    seed: int = 0
    task: str | None = None

    def build_nonlinearity(self) -> Nonlinearity:
        return nonlinearity_from_config(self.nonlinearity_cfg)

    def build_probe(self) -> StateH:
        return self.probe.build(self.grid, self.seed)

    def gateaux_lambdas(self) -> tuple[float, ...]:
        g = self.gateaux
        if g.lambda_base is None:
            return self.lambdas
        count = g.count if g.count is not None else 4
        ratio = g.ratio if g.ratio is not None else 0.5
        return tuple(g.lambda_base * ratio**j for j in range(count))

    def resolved(self) -> dict:
        """Provenance dictionary embedded in every result file."""
        return {
            "task": self.task,
            "seed": self.seed,
            "grid": {
                "points_per_dim": self.grid.points_per_dim,
                "box_length": self.grid.box_length,
            },
            "window": {
                "half_width": self.window.half_width,
                "steps": self.window.steps,
            },
            "nonlinearity": dict(self.nonlinearity_cfg),
            "probe": {
                "kind": self.probe.kind,
                "amplitude": self.probe.amplitude,
                "sigma_fraction": self.probe.sigma_fraction,
            },
            "lambdas": list(self.lambdas),
            "solver": {
                "tolerance": self.solver.tolerance,
                "max_iter": self.solver.max_iter,
                "amplitude_guard": self.solver.amplitude_guard,
            },
            "reconstruct": {
                "orders": list(self.reconstruct.orders),
                "mode": self.reconstruct.mode,
                "known": {str(k): v for k, v in self.reconstruct.known.items()},
                "blind": self.reconstruct.blind,
                "moment_floor_scale": self.reconstruct.moment_floor_scale,
            },
            "gateaux": {
                "orders": list(self.gateaux.orders),
                "lambdas": list(self.gateaux_lambdas()),
            },
            "simulate": {"lambdas": list(self.simulate_lambdas)},
        }

    def probe_label(self) -> str:
        p = self.probe
        return f"{p.kind}(amplitude={p.amplitude}, sigma_fraction={p.sigma_fraction})"


def _parse_lambdas(data: dict) -> tuple[float, ...]:
    _check_keys(data, {"values", "base", "count", "ratio"}, "[lambdas]")
    if "values" in data:
        values = tuple(float(v) for v in data["values"])
        if not values or any(v <= 0 for v in values):
            raise ConfigError("[lambdas].values must be positive and non-empty")
        return values
    base = _get(data, "base", float, required=True)
    count = _get(data, "count", int, default=5)
    ratio = _get(data, "ratio", float, default=0.5)
    if base <= 0 or count < 1 or not 0 < ratio < 1:
        raise ConfigError("[lambdas] needs base > 0, count >= 1, 0 < ratio < 1")
    return tuple(base * ratio**j for j in range(count))


_NONLINEARITY_KEYS = {"kind", "p_coeffs", "c1", "c2", "max_derivative_order"}


def parse_config(data: Mapping[str, Any]) -> RunConfig:
    """Validate a raw mapping (parsed TOML/JSON) into a RunConfig."""
    _check_keys(
        dict(data),
        {
            "task",
            "seed",
            "grid",
            "window",
            "nonlinearity",
            "probe",
            "lambdas",
            "solver",
            "reconstruct",
            "gateaux",
            "simulate",
        },
        "top level",
    )

    grid_data = _section(data, "grid")
    _check_keys(grid_data, {"points_per_dim", "box_length"}, "[grid]")
    try:
        grid = Grid2D(
            _get(grid_data, "points_per_dim", int, required=True),
            _get(grid_data, "box_length", float, required=True),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err

    window_data = _section(data, "window")
    _check_keys(window_data, {"half_width", "steps"}, "[window]")
    try:
        window = TimeWindow(
            _get(window_data, "half_width", float, required=True),
            _get(window_data, "steps", int, required=True),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err

    nl_data = _section(data, "nonlinearity")
    _check_keys(nl_data, _NONLINEARITY_KEYS, "[nonlinearity]")
    try:
        nonlinearity_from_config(nl_data)  # fail fast on bad parameters
    except (KeyError, ValueError) as err:
        raise ConfigError(f"bad [nonlinearity]: {err}") from err

    probe_data = _section(data, "probe", required=False)
    _check_keys(probe_data, {"kind", "amplitude", "sigma_fraction"}, "[probe]")
    probe = ProbeConfig(
        kind=_get(probe_data, "kind", str, default="gaussian"),
        amplitude=_get(probe_data, "amplitude", float, default=1.0),
        sigma_fraction=_get(probe_data, "sigma_fraction", float, default=1.0 / 16.0),
    )
    if probe.kind not in ("gaussian", "random"):
        raise ConfigError(f"unknown probe kind: {probe.kind!r}")

    lambdas = _parse_lambdas(_section(data, "lambdas", required=False) or {"base": 0.05})

    solver_data = _section(data, "solver", required=False)
    _check_keys(solver_data, {"tolerance", "max_iter", "amplitude_guard"}, "[solver]")
    solver = SolverConfig(
        tolerance=_get(solver_data, "tolerance", float, default=1e-11),
        max_iter=_get(solver_data, "max_iter", int, default=200),
        amplitude_guard=_get(solver_data, "amplitude_guard", float, default=0.5),
    )
    if solver.tolerance <= 0 or solver.max_iter < 1 or solver.amplitude_guard <= 0:
        raise ConfigError("[solver] values must be positive")

    rec_data = _section(data, "reconstruct", required=False)
    _check_keys(
        rec_data,
        {"orders", "mode", "known", "blind", "moment_floor_scale"},
        "[reconstruct]",
    )
    known_raw = rec_data.get("known", {})
    if not isinstance(known_raw, Mapping):
        raise ConfigError("[reconstruct].known must be a table of order -> value")
    try:
        known = {int(k): float(v) for k, v in known_raw.items()}
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad [reconstruct].known: {err}") from err
    reconstruct = ReconstructConfig(
        orders=tuple(int(n) for n in rec_data.get("orders", [3])),
        mode=_get(rec_data, "mode", str, default="recursive"),
        known=known,
        blind=bool(rec_data.get("blind", False)),
        moment_floor_scale=_get(rec_data, "moment_floor_scale", float, default=1e-6),
    )
    if reconstruct.mode not in ("recursive", "known_lower", "low"):
        raise ConfigError(f"unknown reconstruct mode: {reconstruct.mode!r}")
    if any(n < 3 for n in reconstruct.orders):
        raise ConfigError("[reconstruct].orders must all be >= 3")

    gx_data = _section(data, "gateaux", required=False)
    _check_keys(gx_data, {"orders", "lambda_base", "count", "ratio"}, "[gateaux]")
    gateaux = GateauxConfig(
        orders=tuple(int(n) for n in gx_data.get("orders", [1, 2, 3])),
        lambda_base=_get(gx_data, "lambda_base", float),
        count=_get(gx_data, "count", int),
        ratio=_get(gx_data, "ratio", float),
    )
    if any(n < 1 for n in gateaux.orders):
        raise ConfigError("[gateaux].orders must all be >= 1")

    sim_data = _section(data, "simulate", required=False)
    _check_keys(sim_data, {"lambdas"}, "[simulate]")
    simulate_lambdas = tuple(float(v) for v in sim_data.get("lambdas", [])) or lambdas

    task = data.get("task")
    if task is not None and task not in ("simulate", "reconstruct", "gateaux"):
        raise ConfigError(f"unknown task: {task!r}")

    return RunConfig(
        grid=grid,
        window=window,
        nonlinearity_cfg=dict(nl_data),
        probe=probe,
        lambdas=lambdas,
        solver=solver,
        reconstruct=reconstruct,
        gateaux=gateaux,
        simulate_lambdas=simulate_lambdas,
        seed=_get(dict(data), "seed", int, default=0),
        task=task,
    )


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a TOML or JSON config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(path.read_text())
        else:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as err:
        raise ConfigError(f"cannot parse {path}: {err}") from err
    if not isinstance(data, Mapping):
        raise ConfigError(f"config root must be a table/object: {path}")
    return parse_config(data)
