"""
Command line interface.

Subcommands: ``simulate``, ``fit``, ``forecast``, ``evaluate``,
``smooth``. All failures exit nonzero with a machine-readable JSON
error object on stderr: exit code 2 for input validation problems,
1 for numerical failures. Option precedence is CLI flag, then config
file (flat ``key=value`` lines, via --config), then built-in default.

"""

from __future__ import annotations

import argparse
import datetime
import json
import sys

import numpy as np

from . import __version__, dataio
from .densities import ConvergenceError
from .estimate import (
    DegenerateFitError,
    NonConvergenceError,
    OptConfig,
    confidence_intervals,
    fit,
    select_order,
)
from .evaluate import InsufficientCyclesError, evaluate, split_by_cycles
from .forecast import HorizonTooShortError, onset_marginal
from .gridfilter import DegenerateLikelihoodError, run_filter, smooth, smoothed_marginals
from .model import ModelParams, PhaseGrid
from .simulate import simulate

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_VALIDATION = 2

_CONFIG_KEYS = {
    "grid_size": int,
    "train_cycles": int,
    "seed": int,
    "restarts": int,
    "max_harmonics": int,
    "missing_rate": float,
}
_DEFAULTS = {
    "grid_size": 512,
    "train_cycles": 29,
    "seed": 0,
    "restarts": 3,
    "max_harmonics": 12,
    "missing_rate": 0.0,
}


class CliValidationError(ValueError):
    pass


class _JsonArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("validation", message)
        raise SystemExit(EXIT_VALIDATION)


def _emit_error(kind: str, message: str) -> None:
    json.dump({"error": kind, "message": message}, sys.stderr)
    sys.stderr.write("\n")


def _read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliValidationError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise CliValidationError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                out[key] = _CONFIG_KEYS[key](value.strip())
            except ValueError:
                raise CliValidationError(
                    f"{path}:{lineno}: bad value for {key}: {value.strip()!r}"
                ) from None
    return out


def _resolve(args, key):
    """CLI flag > config file > built-in default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if getattr(args, "_config", None) and key in args._config:
        return args._config[key]
    return _DEFAULTS[key]


def _grid(args) -> PhaseGrid:
    n = _resolve(args, "grid_size")
    if n < 2:
        raise CliValidationError(f"--grid-size must be >= 2, got {n}")
    return PhaseGrid(int(n))


def _parse_date(text: str, flag: str) -> datetime.date:
    try:
        return datetime.date.fromisoformat(text)
    except ValueError:
        raise CliValidationError(f"{flag} must be an ISO date (YYYY-MM-DD), got {text!r}") from None


def _opt_config(args, order_dim: int | None = None) -> OptConfig:
    return OptConfig(restarts=int(_resolve(args, "restarts")), seed=int(_resolve(args, "seed")))


def _tolerances(cfg: OptConfig) -> dict:
    return {"optimizer_fatol": cfg.fatol, "optimizer_xatol": cfg.xatol}


def _cmd_simulate(args) -> int:
    with open(args.params) as fh:
        params = dataio.params_from_dict(json.load(fh))
    if args.days < 1:
        raise CliValidationError(f"--days must be >= 1, got {args.days}")
    missing = float(_resolve(args, "missing_rate"))
    if not (0.0 <= missing < 1.0):
        raise CliValidationError(f"--missing-rate must lie in [0, 1), got {missing}")
    seed = int(_resolve(args, "seed"))
    start = _parse_date(args.start_date, "--start-date") if args.start_date else datetime.date(2000, 1, 1)
    sim = simulate(params, args.days, missing_rate=missing, seed=seed, start_date=start)
    dataio.write_subject(sim.dataset, args.out)
    if args.latent_out:
        import csv

        with open(args.latent_out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["day", "omega", "advance"])
            for t in range(1, args.days + 1):
                w.writerow([t, repr(float(sim.latent_phases[t])), repr(float(sim.latent_advances[t - 1]))])
    return EXIT_OK


def _fit_params_for(args, data, grid, cfg):
    """Shared by fit/evaluate: either a single order or an AIC scan."""
    if args.select_order:
        max_m = int(_resolve(args, "max_harmonics"))
        if not (1 <= max_m <= 12):
            raise CliValidationError(f"--max-harmonics must lie in [1, 12], got {max_m}")
        scan = select_order(data, grid, orders=range(1, max_m + 1), cfg=cfg)
        return scan.best, scan.rows
    order = args.harmonics
    if order is None:
        raise CliValidationError("one of --harmonics or --select-order is required")
    if not (1 <= order <= 12):
        raise CliValidationError(f"--harmonics must lie in [1, 12], got {order}")
    return fit(data, order, grid, cfg), None


def _cmd_fit(args) -> int:
    data = dataio.load_subject(args.input)
    grid = _grid(args)
    cfg = _opt_config(args)
    result, rows = _fit_params_for(args, data, grid, cfg)
    if args.ci:
        result.ci = confidence_intervals(result, data, grid)
    report = dataio.fit_report_dict(
        result, grid_size=grid.n, seed=cfg.seed, tolerances=_tolerances(cfg), aic_rows=rows
    )
    dataio.write_json(report, args.out)
    return EXIT_OK


def _cmd_forecast(args) -> int:
    data = dataio.load_subject(args.input)
    report = dataio.load_fit_report(args.model)
    params = dataio.params_from_dict(report["params"])
    grid = PhaseGrid(int(args.grid_size)) if args.grid_size else PhaseGrid(int(report["grid_size"]))
    as_of = _parse_date(args.as_of, "--as-of")
    day = data.day_of(as_of)
    if day < 0:
        raise CliValidationError(
            f"--as-of {as_of} is before the first record {data.start_date}"
        )
    if day >= data.n_days:
        raise CliValidationError(
            f"--as-of {as_of} is after the last record "
            f"{data.date_of(data.n_days - 1)}"
        )
    fr = run_filter(params, data.slice(0, day + 1), grid)
    fc = onset_marginal(fr.filter_marginals[-1], grid, params)
    dataio.write_forecast_csv(fc, as_of, args.out)
    summary_path = args.summary or str(args.out) + ".json"
    summary = dataio.forecast_summary_dict(fc, as_of)
    summary.update(
        {
            "artifact_version": __version__,
            "grid_size": grid.n,
            "as_of": as_of.isoformat(),
            "model": str(args.model),
        }
    )
    dataio.write_json(summary, summary_path)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    data = dataio.load_subject(args.input)
    grid = _grid(args)
    n_train = int(_resolve(args, "train_cycles"))
    if n_train < 1:
        raise CliValidationError(f"--train-cycles must be >= 1, got {n_train}")
    train, _ = split_by_cycles(data, n_train)
    cfg = _opt_config(args)
    import pathlib

    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.model:
        fit_report = dataio.load_fit_report(args.model)
        params = dataio.params_from_dict(fit_report["params"])
    else:
        result, rows = _fit_params_for(args, train, grid, cfg)
        params = result.params
        fit_report = dataio.fit_report_dict(
            result, grid_size=grid.n, seed=cfg.seed, tolerances=_tolerances(cfg), aic_rows=rows
        )
        dataio.write_json(fit_report, out_dir / "fit_report.json")
    report = evaluate(params, data, n_train, grid)
    dataio.write_eval_csvs(report, out_dir)
    summary = {
        "artifact_version": __version__,
        "grid_size": grid.n,
        "harmonic_order": len(fit_report["params"]["b"]),
        "seed": int(_resolve(args, "seed")),
        "train_cycles": n_train,
        "n_test_cycles": report.n_test_cycles,
        "best_calendar_length": report.best_calendar.length,
        "best_calendar_rmse": report.best_calendar.rmse,
        "reduction_rate": report.reduction_rate,
    }
    dataio.write_json(summary, out_dir / "evaluation_summary.json")
    return EXIT_OK


def _cmd_smooth(args) -> int:
    from .model import build_transition

    data = dataio.load_subject(args.input)
    report = dataio.load_fit_report(args.model)
    params = dataio.params_from_dict(report["params"])
    grid = PhaseGrid(int(args.grid_size)) if args.grid_size else PhaseGrid(int(report["grid_size"]))
    trans = build_transition(params, grid)
    fr = run_filter(params, data, grid, keep_joints=True, trans=trans)
    joints = smooth(fr, trans)
    dataio.write_marginals_csv(smoothed_marginals(joints), grid.points, args.out)
    if args.filtered_out:
        dataio.write_marginals_csv(fr.filter_marginals, grid.points, args.filtered_out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _JsonArgumentParser(prog="bbtcycle", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="random seed (default 0)")

    p = sub.add_parser("simulate", help="sample a synthetic subject from the model")
    add_common(p)
    p.add_argument("--params", required=True, help="JSON file with alpha/beta/sigma/a/b/c")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--missing-rate", type=float, dest="missing_rate")
    p.add_argument("--start-date", dest="start_date")
    p.add_argument("--out", required=True, help="subject CSV to write")
    p.add_argument("--latent-out", dest="latent_out", help="optional latent truth CSV")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="maximum-likelihood fit, optionally with AIC order scan")
    add_common(p)
    p.add_argument("--input", required=True, help="subject CSV")
    p.add_argument("--harmonics", type=int, help="harmonic order M")
    p.add_argument("--select-order", action="store_true", dest="select_order")
    p.add_argument("--max-harmonics", type=int, dest="max_harmonics")
    p.add_argument("--grid-size", type=int, dest="grid_size")
    p.add_argument("--restarts", type=int)
    p.add_argument("--ci", action="store_true", help="compute Wald confidence intervals")
    p.add_argument("--out", required=True, help="fit report JSON path")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("forecast", help="onset forecast from the filter state at a date")
    add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True, help="fit report JSON")
    p.add_argument("--as-of", required=True, dest="as_of", help="forecast day (ISO date)")
    p.add_argument("--grid-size", type=int, dest="grid_size")
    p.add_argument("--out", required=True, help="forecast CSV path")
    p.add_argument("--summary", help="summary JSON path (default: <out>.json)")
    p.set_defaults(func=_cmd_forecast)

    p = sub.add_parser("evaluate", help="sequential vs calendar accuracy tables")
    add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--train-cycles", type=int, dest="train_cycles")
    p.add_argument("--grid-size", type=int, dest="grid_size")
    p.add_argument("--model", help="fit report JSON (skips internal fitting)")
    p.add_argument("--harmonics", type=int)
    p.add_argument("--select-order", action="store_true", dest="select_order")
    p.add_argument("--max-harmonics", type=int, dest="max_harmonics")
    p.add_argument("--restarts", type=int)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("smooth", help="fixed-interval smoothed phase densities")
    add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--grid-size", type=int, dest="grid_size")
    p.add_argument("--out", required=True, help="smoothed marginals CSV")
    p.add_argument("--filtered-out", dest="filtered_out", help="also dump filter marginals")
    p.set_defaults(func=_cmd_smooth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args._config = _read_config(args.config) if args.config else {}
        return args.func(args)
    except (
        DegenerateLikelihoodError,
        DegenerateFitError,
        NonConvergenceError,
        HorizonTooShortError,
        ConvergenceError,
        ArithmeticError,
        np.linalg.LinAlgError,
    ) as e:
        _emit_error("numerical", str(e))
        return EXIT_NUMERICAL
    except (
        CliValidationError,
        dataio.ParseError,
        InsufficientCyclesError,
        FileNotFoundError,
        IsADirectoryError,
        ValueError,
    ) as e:
        _emit_error("validation", str(e))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
