"""Command-line entry points.

Subcommands: ``expand`` (print correction polynomials), ``simulate``
(scattering pipeline at fixed amplitudes), ``reconstruct`` (Taylor
coefficient recovery), ``gateaux`` (formula vs numeric differentials),
``sweep`` (batch over config files). Outputs are JSON reports, flat CSV
tables, and whitespace-delimited two-column plot series; every file
embeds the resolved config. Runs are deterministic for a fixed config
and seed.

Exit codes: 0 success, 2 config error, 3 solver non-convergence or
amplitude guard violation, 4 probe rejected by the moment floor.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .fields import h_norm
from .gateaux import gateaux_formula, gateaux_numeric
from .reconstruction import (
    OrderResult,
    ProbeRejectedError,
    ReconstructionReport,
    fit_rate,
    reconstruct_known_lower,
    reconstruct_recursive,
    solver_k_eval,
)
from .scattering import K_functional, SolverError, scattering_output, solve
from .terms import build_W, build_cubic_W, build_W_tilde

__all__ = ["main"]

CSV_HEADER = "order,lambda,estimate,truth,abs_error"


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _guard_check(config: RunConfig, max_multiplier: int, lambdas) -> None:
    norm = h_norm(config.build_probe())
    worst = max_multiplier * max(lambdas) * norm
    if worst > config.solver.amplitude_guard:
        raise SolverError(
            f"amplitude guard violated: max sample amplitude {worst:.3g} "
            f"exceeds guard {config.solver.amplitude_guard:.3g}",
            diagnostics=None,
        )


# -- expand ------------------------------------------------------------------


def cmd_expand(order: int, cubic: bool) -> int:
    if cubic:
        if order < 3 or order % 2 == 0:
            raise ConfigError(f"cubic expansion needs odd order >= 3, got {order}")
        print(f"C[{order}] = {build_cubic_W(order)}")
        return 0
    if order < 3:
        raise ConfigError(f"expansion needs order >= 3, got {order}")
    w_part = build_W(order) if order >= 5 else None
    print(f"W[{order}]  = {w_part if w_part is not None else 0}")
    print(f"W~[{order}] = {build_W_tilde(order)}")
    return 0


# -- simulate ----------------------------------------------------------------


def cmd_simulate(config: RunConfig, out_dir: Path) -> int:
    spec = config.build_nonlinearity()
    probe = config.build_probe()
    _guard_check(config, 1, config.simulate_lambdas)

    results = []
    for lam in config.simulate_lambdas:
        u, diag = solve(
            lam * probe,
            spec,
            config.window,
            config.solver.tolerance,
            config.solver.max_iter,
        )
        phi_plus = scattering_output(u, lam * probe, spec)
        k_pair = K_functional(
            probe, lam, spec, config.window, "via_pairing",
            config.solver.tolerance, config.solver.max_iter,
        )
        k_out = K_functional(
            probe, lam, spec, config.window, "via_output",
            config.solver.tolerance, config.solver.max_iter,
        )
        results.append(
            {
                "lambda": lam,
                "iterations": diag.iterations,
                "final_residual": diag.final_residual,
                "converged": diag.converged,
                "K_via_pairing": k_pair,
                "K_via_output": k_out,
                "phi_plus_norm": h_norm(phi_plus),
                "phi_plus": {
                    "f": phi_plus.f.tolist(),
                    "g": phi_plus.g.tolist(),
                },
            }
        )
    _write_json(out_dir / "simulate.json", {"config": config.resolved(), "results": results})
    print(f"wrote {out_dir / 'simulate.json'} ({len(results)} amplitudes)")
    return 0


# -- reconstruct -------------------------------------------------------------


def _order_payload(result: OrderResult) -> dict:
    return {
        "order": result.order,
        "lambdas": list(result.lambdas),
        "estimates": list(result.estimates),
        "extrapolated": result.extrapolated,
        "moment": result.moment_value,
        "probe": result.probe_label,
        "truth": result.truth,
        "abs_errors": list(result.abs_errors) if result.abs_errors else None,
        "slope": result.slope,
    }


def _write_reconstruction(report: ReconstructionReport, config: RunConfig, out_dir: Path) -> None:
    payload = {
        "config": config.resolved(),
        "orders": [_order_payload(r) for r in report.orders],
        "failure": report.failure,
    }
    _write_json(out_dir / "report.json", payload)

    lines = [CSV_HEADER]
    for r in report.orders:
        for i, lam in enumerate(r.lambdas):
            truth = "" if r.truth is None else repr(r.truth)
            err = "" if r.abs_errors is None else repr(r.abs_errors[i])
            lines.append(f"{r.order},{lam!r},{r.estimates[i]!r},{truth},{err}")
    (out_dir / "report.csv").write_text("\n".join(lines) + "\n")

    for r in report.orders:
        series = r.abs_errors if r.abs_errors is not None else r.estimates
        name = "error" if r.abs_errors is not None else "estimate"
        rows = "\n".join(f"{lam!r} {val!r}" for lam, val in zip(r.lambdas, series))
        (out_dir / f"order_{r.order}_{name}_vs_lambda.dat").write_text(rows + "\n")


def _recursive_orders(config: RunConfig) -> tuple[int, ...]:
    """Close the requested orders under the variable dependencies of the
    correction polynomials."""
    needed = set()
    stack = list(config.reconstruct.orders)
    while stack:
        n = stack.pop()
        if n in needed:
            continue
        needed.add(n)
        if n >= 5:
            stack.extend(build_W(n).variables())
    return tuple(sorted(needed))


def cmd_reconstruct(config: RunConfig, out_dir: Path) -> int:
    spec = config.build_nonlinearity()
    probe = config.build_probe()
    rec = config.reconstruct
    max_order = max(rec.orders)
    _guard_check(config, max_order + 1, config.lambdas)

    if rec.mode == "recursive":
        report = reconstruct_recursive(
            _recursive_orders(config),
            probe,
            config.lambdas,
            spec,
            config.window,
            k_eval=solver_k_eval(
                spec, config.window, config.solver.tolerance, config.solver.max_iter
            ),
            moment_floor_scale=rec.moment_floor_scale,
            blind=rec.blind,
            probe_label=config.probe_label(),
        )
        if report.failure_exc is not None and not report.orders:
            raise report.failure_exc
    else:
        results = []
        for n in rec.orders:
            known = {} if rec.mode == "low" else rec.known
            truth = None if rec.blind else spec.taylor_coefficient(n)
            results.append(
                reconstruct_known_lower(
                    n,
                    probe,
                    config.lambdas,
                    known,
                    spec,
                    config.window,
                    k_eval=solver_k_eval(
                        spec,
                        config.window,
                        config.solver.tolerance,
                        config.solver.max_iter,
                    ),
                    moment_floor_scale=rec.moment_floor_scale,
                    truth=truth,
                    probe_label=config.probe_label(),
                )
            )
        report = ReconstructionReport(orders=tuple(results))

    _write_reconstruction(report, config, out_dir)
    for r in report.orders:
        closing = f" truth {r.truth}" if r.truth is not None else ""
        slope = f" slope {r.slope:.3f}" if r.slope is not None else ""
        print(
            f"order {r.order}: extrapolated {r.extrapolated:.6g}"
            f"{closing}{slope} (moment {r.moment_value:.3g})"
        )
    if report.failure:
        print(f"cascade truncated: {report.failure}", file=sys.stderr)
    print(f"wrote {out_dir / 'report.json'}")
    return 0


# -- gateaux -----------------------------------------------------------------


def cmd_gateaux(config: RunConfig, out_dir: Path) -> int:
    spec = config.build_nonlinearity()
    probe = config.build_probe()
    lambdas = config.gateaux_lambdas()
    orders = config.gateaux.orders
    _guard_check(config, max(orders) + 1, lambdas)

    rows = []
    for n in orders:
        formula = gateaux_formula(n, probe, spec, config.window)
        formula_norm = h_norm(formula)
        errors = []
        for lam in lambdas:
            numeric = gateaux_numeric(
                n, probe, spec, config.window, lam,
                config.solver.tolerance, config.solver.max_iter,
            )
            errors.append(h_norm(numeric - formula))
        try:
            slope = fit_rate(lambdas, errors).slope
        except ValueError:
            slope = None
        rows.append(
            {
                "order": n,
                "formula_norm": formula_norm,
                "lambdas": list(lambdas),
                "errors": errors,
                "slope": slope,
            }
        )

    _write_json(out_dir / "gateaux.json", {"config": config.resolved(), "orders": rows})
    print(f"{'N':>3} {'|formula|':>12} {'err@min lam':>12} {'slope':>8}")
    for row in rows:
        slope = f"{row['slope']:.3f}" if row["slope"] is not None else "-"
        print(
            f"{row['order']:>3} {row['formula_norm']:>12.5e} "
            f"{row['errors'][-1]:>12.5e} {slope:>8}"
        )
    print(f"wrote {out_dir / 'gateaux.json'}")
    return 0


# -- sweep -------------------------------------------------------------------


def cmd_sweep(config_dir: Path, out_dir: Path, seed: int | None) -> int:
    if not config_dir.is_dir():
        raise ConfigError(f"sweep expects a directory of configs: {config_dir}")
    paths = sorted(
        p for p in config_dir.iterdir() if p.suffix.lower() in (".toml", ".json")
    )
    if not paths:
        raise ConfigError(f"no .toml/.json configs in {config_dir}")
    for path in paths:
        config = load_config(path)
        if seed is not None:
            config = _override(config, seed=seed)
        if config.task is None:
            raise ConfigError(f"{path} has no 'task' key (required for sweep)")
        sub_out = out_dir / path.stem
        print(f"== {path.name} -> {sub_out}")
        _dispatch_task(config.task, config, sub_out)
    return 0


def _dispatch_task(task: str, config: RunConfig, out_dir: Path) -> int:
    if task == "simulate":
        return cmd_simulate(config, out_dir)
    if task == "reconstruct":
        return cmd_reconstruct(config, out_dir)
    if task == "gateaux":
        return cmd_gateaux(config, out_dir)
    raise ConfigError(f"unknown task: {task!r}")


def _override(config: RunConfig, seed: int | None = None, blind: bool | None = None,
              order: int | None = None) -> RunConfig:
    from dataclasses import replace

    out = config
    if seed is not None:
        out = replace(out, seed=seed)
    if blind:
        out = replace(out, reconstruct=replace(out.reconstruct, blind=True))
    if order is not None:
        out = replace(out, reconstruct=replace(out.reconstruct, orders=(order,)))
    return out


# -- argument parsing --------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlkg-inverse",
        description="Scattering simulation and nonlinearity reconstruction "
        "for the 2D nonlinear Klein-Gordon equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_expand = sub.add_parser("expand", help="print correction polynomials")
    p_expand.add_argument("--order", type=int, required=True)
    p_expand.add_argument("--cubic", action="store_true")

    for name in ("simulate", "reconstruct", "gateaux"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=True)
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--seed", type=int, default=None)
        if name == "reconstruct":
            p.add_argument("--order", type=int, default=None)
            p.add_argument("--blind", action="store_true")

    p_sweep = sub.add_parser("sweep", help="run every config in a directory")
    p_sweep.add_argument("--config", type=Path, required=True)
    p_sweep.add_argument("--out", type=Path, default=Path("out"))
    p_sweep.add_argument("--seed", type=int, default=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "expand":
            return cmd_expand(args.order, args.cubic)
        if args.command == "sweep":
            return cmd_sweep(args.config, args.out, args.seed)
        config = load_config(args.config)
        config = _override(
            config,
            seed=args.seed,
            blind=getattr(args, "blind", None),
            order=getattr(args, "order", None),
        )
        return _dispatch_task(args.command, config, args.out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except SolverError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 3
    except ProbeRejectedError as err:
        print(f"probe rejected: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
