"""Command-line entry point: bounds, trial, sweep, fit, check, report.

Exit codes: 0 success, 1 configuration error, 2 capacity error,
3 bound violation (from `check`).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .bounds import BoundError, eval_bound, optimal_params
from .harness import (
    ConfigError,
    ExperimentConfig,
    SweepContext,
    apply_overrides,
    audit_bounds,
    fit_scaling,
    run_sweep,
    run_trial,
)
from .jsonfmt import dumps17
from .lattice import LatticeError
from .linalg import LinalgError
from .metrics import MetricsError
from .noise import NoiseError
from .operators import CapacityError, OperatorError
from .report import emit_report
from .trotter import TrotterError

CONFIG_ERRORS = (
    ConfigError,
    OperatorError,
    LatticeError,
    LinalgError,
    MetricsError,
    NoiseError,
    TrotterError,
    BoundError,
    KeyError,
    FileNotFoundError,
    json.JSONDecodeError,
)


def _load_config(path: str, overrides: list[str]) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if overrides:
        doc = apply_overrides(doc, overrides)
    return ExperimentConfig.from_dict(doc)


def _cmd_bounds(args) -> int:
    config = _load_config(args.config, args.override)
    ctx = SweepContext(config)
    reports = []
    for point in config.points():
        trunc = ctx.trunc(point["l"])
        par = ctx.bound_params({**point, "l": trunc.l}, trunc)
        report = eval_bound(args.theorem, par).as_dict()
        if args.theorem in ("T1", "T2", "T3", "T7"):
            try:
                report["optimal"] = optimal_params(args.theorem, par)
            except BoundError:
                pass
        reports.append({"point": {**point, "l": trunc.l}, "report": report})
    print(dumps17(reports if len(reports) > 1 else reports[0], indent=2))
    return 0


def _cmd_trial(args) -> int:
    config = _load_config(args.config, args.override)
    ctx = SweepContext(config)
    points = [{**p, "l": ctx.trunc(p["l"]).l} for p in config.points()]
    if not 0 <= args.point < len(points):
        raise ConfigError(f"point index {args.point} out of range ({len(points)} points)")
    sample = run_trial(ctx, points[args.point], args.point, args.trial)
    print(
        dumps17(
            {
                "delta_rho": sample.delta_rho,
                "delta_wc": sample.delta_wc,
                "hs_distance": sample.hs_distance,
                "metadata": {k: v for k, v in sample.metadata.items() if k != "runtime_ms"},
            },
            indent=2,
        )
    )
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args.config, args.override)
    result = run_sweep(config, out_dir=args.out, resume=not args.no_resume)
    sys.stderr.write(
        f"sweep complete: {len(result.points)} points x {config.trials} trials "
        f"in {result.runtime_s:.1f}s -> {args.out}\n"
    )
    return 0


def _cmd_fit(args) -> int:
    rows = _read_results_csv(os.path.join(args.out, "results.csv"))
    fits = _fit_results(rows, axis=args.axis, measure=args.measure, log_correction=args.log_correction)
    path = os.path.join(args.out, "fits.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps17(fits, indent=2))
    print(dumps17(fits, indent=2))
    return 0


def _cmd_check(args) -> int:
    config = _load_config(args.config, args.override)
    result = run_sweep(config, out_dir=args.out)
    violations = audit_bounds(result)
    payload = {
        "theorems": list(config.theorems),
        "points": len(result.points),
        "trials": config.trials,
        "violations": violations,
    }
    print(dumps17(payload, indent=2))
    return 3 if violations else 0


def _cmd_report(args) -> int:
    written = emit_report(args.out, measure=args.measure, figures=not args.no_figures)
    for path in written:
        print(path)
    return 0


def _read_results_csv(path: str) -> list[dict]:
    if not os.path.exists(path):
        raise ConfigError(f"no results.csv at {path}; run `stabsim sweep` first")
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _fit_results(rows: list[dict], axis: str | None, measure: str, log_correction: float) -> list[dict]:
    axes = ("t", "delta", "n", "l", "lambda", "p")
    points: dict[tuple, list[float]] = {}
    for row in rows:
        key = tuple(row[a] for a in axes)
        points.setdefault(key, []).append(float(row["delta_rho"]))
    if axis is None:
        varying = [a for i, a in enumerate(axes) if len({k[i] for k in points}) > 1]
        if not varying:
            raise ConfigError("no varying axis to fit against")
        axis = varying[0]
    ai = axes.index(axis)
    series: dict[tuple, list[tuple[float, float]]] = {}
    for key, vals in points.items():
        if key[ai] in ("", "inf"):
            continue
        rest = tuple(v for i, v in enumerate(key) if i != ai)
        y = max(vals) if measure == "max" else float(sum(vals) / len(vals))
        series.setdefault(rest, []).append((float(key[ai]), y))
    fits = []
    for rest, pts in sorted(series.items()):
        if len(pts) < 4:
            continue
        fit = fit_scaling(pts, log_correction_q=log_correction)
        fits.append(
            {
                "axis": axis,
                "series": {a: v for a, v in zip([a for i, a in enumerate(axes) if i != ai], rest)},
                "exponent": fit.exponent,
                "stderr": fit.stderr,
                "r2": fit.r2,
                "window": list(fit.window),
                "n_points": fit.n_points,
                "measure": measure,
            }
        )
    if not fits:
        raise ConfigError(f"fewer than 4 points along axis {axis!r}")
    return fits


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stabsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--override", action="append", default=[], help="key=value (dotted paths)")

    p_bounds = sub.add_parser("bounds", help="evaluate a theorem RHS on the config grid")
    common(p_bounds)
    p_bounds.add_argument("--theorem", required=True)
    p_bounds.set_defaults(func=_cmd_bounds)

    p_trial = sub.add_parser("trial", help="run a single seeded trial")
    common(p_trial)
    p_trial.add_argument("--point", type=int, default=0)
    p_trial.add_argument("--trial", type=int, default=0)
    p_trial.set_defaults(func=_cmd_trial)

    p_sweep = sub.add_parser("sweep", help="run the full grid and persist results")
    common(p_sweep)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--no-resume", action="store_true")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_fit = sub.add_parser("fit", help="fit scaling exponents from results.csv")
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--axis", default=None, choices=["t", "delta", "n", "l", "lambda", "p"])
    p_fit.add_argument("--measure", default="mean", choices=["mean", "max"])
    p_fit.add_argument("--log-correction", type=float, default=0.0)
    p_fit.set_defaults(func=_cmd_fit)

    p_check = sub.add_parser("check", help="run the sweep and audit the configured bounds")
    common(p_check)
    p_check.add_argument("--out", required=True)
    p_check.set_defaults(func=_cmd_check)

    p_report = sub.add_parser("report", help="emit plot data and figures from a sweep")
    p_report.add_argument("--out", required=True)
    p_report.add_argument("--measure", default="mean", choices=["mean", "max", "max_wc"])
    p_report.add_argument("--no-figures", action="store_true")
    p_report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as err:
        sys.stderr.write(f"capacity error: {err}\n")
        return 2
    except CONFIG_ERRORS as err:
        sys.stderr.write(f"config error: {err}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
