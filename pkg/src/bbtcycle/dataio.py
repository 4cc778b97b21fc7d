"""
Subject CSV ingestion and report serialization.

Subject files are one row per day with header ``date,bbt,menses``:
ISO-8601 dates that must be strictly consecutive, an optional decimal
temperature (empty when not measured), and a 0/1 onset flag. A day with
no measurement is still a row.

"""

from __future__ import annotations

import csv
import datetime
import json
import math

import numpy as np

from .estimate import FitResult, OptimizerTrace
from .evaluate import EvalReport, MENSTRUAL_DAY
from .forecast import OnsetForecast
from .model import CycleDataset, ModelParams

SUBJECT_HEADER = ["date", "bbt", "menses"]


class ParseError(ValueError):
    """Malformed subject file; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class NonConsecutiveDatesError(ParseError):
    pass


class BadMensesFlagError(ParseError):
    pass


def load_subject(path, subject_id: str | None = None) -> CycleDataset:
    """
    Read a subject CSV into a CycleDataset.

    Dates must advance by exactly one day per row. Temperatures outside
    the sanity window become missing (with a logged warning) inside
    CycleDataset itself; row count is always preserved.

    """
    dates: list[datetime.date] = []
    bbt: list[float] = []
    menses: list[bool] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "empty file") from None
        if [h.strip().lower() for h in header] != SUBJECT_HEADER:
            raise ParseError(1, f"header must be {','.join(SUBJECT_HEADER)!r}, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise ParseError(lineno, f"expected 3 fields, got {len(row)}")
            raw_date, raw_bbt, raw_menses = (cell.strip() for cell in row)
            try:
                day = datetime.date.fromisoformat(raw_date)
            except ValueError:
                raise ParseError(lineno, f"bad date {raw_date!r}") from None
            if dates and (day - dates[-1]).days != 1:
                raise NonConsecutiveDatesError(
                    lineno, f"date {day} does not follow {dates[-1]} by one day"
                )
            if raw_bbt == "":
                value = math.nan
            else:
                try:
                    value = float(raw_bbt)
                except ValueError:
                    raise ParseError(lineno, f"bad temperature {raw_bbt!r}") from None
            if raw_menses not in ("0", "1"):
                raise BadMensesFlagError(lineno, f"menses flag must be 0 or 1, got {raw_menses!r}")
            dates.append(day)
            bbt.append(value)
            menses.append(raw_menses == "1")
    if not dates:
        raise ParseError(2, "no data rows")
    return CycleDataset(
        bbt=np.array(bbt),
        menses=np.array(menses),
        subject_id=subject_id or str(path),
        start_date=dates[0],
    )


def write_subject(dataset: CycleDataset, path) -> None:
    """Write the CSV this module reads; round-trips values exactly."""
    start = dataset.start_date or datetime.date(2000, 1, 1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUBJECT_HEADER)
        for i in range(dataset.n_days):
            y = dataset.bbt[i]
            writer.writerow(
                [
                    (start + datetime.timedelta(days=i)).isoformat(),
                    "" if math.isnan(y) else repr(float(y)),
                    int(dataset.menses[i]),
                ]
            )


def params_to_dict(params: ModelParams) -> dict:
    return {
        "alpha": params.alpha,
        "beta": params.beta,
        "sigma": params.sigma,
        "a": params.a,
        "b": list(params.b),
        "c": list(params.c),
    }


def params_from_dict(d: dict) -> ModelParams:
    try:
        return ModelParams(
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            sigma=float(d["sigma"]),
            a=float(d["a"]),
            b=tuple(float(x) for x in d["b"]),
            c=tuple(float(x) for x in d["c"]),
        )
    except (KeyError, TypeError) as e:
        raise ValueError(f"malformed parameter record: {e}") from None


def fit_report_dict(
    fit: FitResult,
    grid_size: int,
    seed: int,
    tolerances: dict,
    aic_rows=None,
) -> dict:
    """Everything a fit run must disclose: no silent defaults in reports."""
    from . import __version__

    report = {
        "artifact_version": __version__,
        "grid_size": grid_size,
        "harmonic_order": fit.order,
        "seed": seed,
        "tolerances": tolerances,
        "params": params_to_dict(fit.params),
        "loglik": fit.loglik,
        "aic": fit.aic,
        "n_params": fit.n_params,
        "optimizer": {
            "iterations": fit.trace.iterations,
            "fevals": fit.trace.fevals,
            "converged": fit.trace.converged,
            "n_starts": fit.trace.n_starts,
            "best_start": fit.trace.best_start,
            "simplex_spread": fit.trace.simplex_spread,
            "message": fit.trace.message,
        },
        "ci": fit.ci,
    }
    if aic_rows is not None:
        report["aic_table"] = [
            {
                "order": r.order,
                "aic": None if math.isnan(r.aic) else r.aic,
                "loglik": None if math.isnan(r.loglik) else r.loglik,
                "converged": r.converged,
                "error": r.error,
            }
            for r in aic_rows
        ]
    return report


def write_json(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_fit_report(path) -> dict:
    with open(path) as fh:
        report = json.load(fh)
    if "params" not in report:
        raise ValueError(f"{path} is not a fit report (no 'params' key)")
    return report


def write_forecast_csv(
    forecast: OnsetForecast, as_of: datetime.date | None, path
) -> None:
    """Rows (k, calendar_date, probability); dates blank when unknown."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "calendar_date", "probability"])
        for k in range(1, forecast.k_max + 1):
            day = (as_of + datetime.timedelta(days=k)).isoformat() if as_of else ""
            writer.writerow([k, day, repr(float(forecast.probs[k - 1]))])


def forecast_summary_dict(
    forecast: OnsetForecast, as_of: datetime.date | None
) -> dict:
    return {
        "k_star": forecast.k_star,
        "date_star": (
            (as_of + datetime.timedelta(days=forecast.k_star)).isoformat() if as_of else None
        ),
        "mass_captured": forecast.mass_captured,
    }


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else f"{x:.6f}"


def write_eval_csvs(report: EvalReport, out_dir) -> list:
    """
    Emit the four accuracy tables plus plot data (lead vs RMSE).

    Returns the written file paths.

    """
    import pathlib

    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def lead_label(lead):
        return MENSTRUAL_DAY if lead == MENSTRUAL_DAY else f"{lead}_days_before_onset"

    p = out / "sequential_rmse.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["prediction_time_point", "rmse", "n_cycles"])
        for r in report.sequential:
            w.writerow([lead_label(r.lead), _fmt(r.rmse), r.n_cycles])
    written.append(p)

    p = out / "sequential_mae.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["prediction_time_point", "mae", "n_cycles"])
        for r in report.sequential:
            w.writerow([lead_label(r.lead), _fmt(r.mae), r.n_cycles])
    written.append(p)

    p = out / "calendar_rmse.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["predicted_cycle_length", "rmse"])
        for r in report.calendar:
            w.writerow([r.length, _fmt(r.rmse)])
    written.append(p)

    p = out / "calendar_mae.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["predicted_cycle_length", "mae"])
        for r in report.calendar:
            w.writerow([r.length, _fmt(r.mae)])
    written.append(p)

    p = out / "rmse_by_lead.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lead", "rmse", "best_calendar_rmse"])
        for r in report.sequential:
            w.writerow([lead_label(r.lead), _fmt(r.rmse), _fmt(report.best_calendar.rmse)])
    written.append(p)

    return written


def write_marginals_csv(marginals: np.ndarray, grid_points: np.ndarray, path) -> None:
    """Per-day density dump, rows (t, omega, density); t is 1-based."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "omega", "density"])
        for t in range(marginals.shape[0]):
            for i in range(marginals.shape[1]):
                writer.writerow([t + 1, f"{grid_points[i]:.10f}", repr(float(marginals[t, i]))])
