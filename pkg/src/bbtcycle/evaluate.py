"""
Prediction-accuracy experiment: train on the first cycles, then compare
sequentially updated onset predictions at fixed lead times against the
calendar method (previous onset plus a fixed number of days).

"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forecast import onset_marginal
from .gridfilter import run_filter
from .model import CycleDataset, ModelParams, PhaseGrid

# Prediction time-points: the day of the previous onset itself, then
# fixed numbers of days before the actual next onset.
LEAD_DAYS = (21, 14, 7, 6, 5, 4, 3, 2, 1)
MENSTRUAL_DAY = "menstrual_day"

CALENDAR_LENGTHS = tuple(range(27, 38))


class InsufficientCyclesError(ValueError):
    """Fewer complete cycles in the data than the split requires."""


@dataclass(eq=False)
class SequentialRow:
    lead: object  # MENSTRUAL_DAY or int days before onset
    rmse: float
    mae: float
    n_cycles: int


@dataclass(eq=False)
class CalendarRow:
    length: int
    rmse: float
    mae: float


@dataclass(eq=False)
class EvalReport:
    sequential: list
    calendar: list
    best_calendar: CalendarRow
    reduction_rate: float
    n_test_cycles: int


def split_by_cycles(data: CycleDataset, n_train_cycles: int):
    """
    Split at the onset that closes training cycle ``n_train_cycles``.

    The boundary onset day anchors both halves: it ends the last
    training cycle and starts the first test cycle. Concatenating the
    training days with the test days minus that shared boundary day
    reproduces the original series.

    """
    if n_train_cycles < 1:
        raise ValueError(f"n_train_cycles must be >= 1, got {n_train_cycles}")
    onsets = data.onsets()
    if onsets.size < n_train_cycles + 2:
        raise InsufficientCyclesError(
            f"need more than {n_train_cycles} complete cycles, found {max(onsets.size - 1, 0)}"
        )
    boundary = int(onsets[n_train_cycles])
    train = data.slice(0, boundary + 1)
    test = data.slice(boundary, data.n_days)
    return train, test


def evaluation_cycles(data: CycleDataset, n_train_cycles: int) -> list:
    """(previous onset, next onset) day-index pairs of the test cycles."""
    onsets = data.onsets()
    if onsets.size < n_train_cycles + 2:
        raise InsufficientCyclesError(
            f"need more than {n_train_cycles} complete cycles, found {max(onsets.size - 1, 0)}"
        )
    return [
        (int(onsets[i]), int(onsets[i + 1])) for i in range(n_train_cycles, onsets.size - 1)
    ]


def _stats(errors: list) -> tuple:
    if not errors:
        return math.nan, math.nan
    e = np.asarray(errors, dtype=float)
    return float(np.sqrt(np.mean(e * e))), float(np.mean(np.abs(e)))


def sequential_eval(
    params: ModelParams,
    full_data: CycleDataset,
    cycle_pairs: list,
    grid: PhaseGrid,
) -> list:
    """
    Point-prediction errors of the sequential method at each lead.

    One filtering pass over the full record supplies the state at every
    day; the filter is causal, so the marginal at day t is identical to
    what a run truncated at day t would produce (no look-ahead). For a
    test cycle ending at onset day t*, the prediction at lead d is made
    on day t* - d from that day's filtering marginal: predicted onset =
    (t* - d) + argmax_k h(k). The menstrual-day row predicts from the
    previous onset day itself. Cycles shorter than a lead are skipped
    for that lead; per-lead cycle counts are reported.

    """
    fr = run_filter(params, full_data, grid)
    errors: dict = {MENSTRUAL_DAY: []}
    for d in LEAD_DAYS:
        errors[d] = []

    for t_prev, t_next in cycle_pairs:
        leads = [(MENSTRUAL_DAY, t_prev)] + [
            (d, t_next - d) for d in LEAD_DAYS if t_next - d >= t_prev
        ]
        for key, t_pred in leads:
            fc = onset_marginal(fr.filter_marginals[t_pred], grid, params)
            predicted = t_pred + fc.k_star
            errors[key].append(predicted - t_next)

    rows = []
    for key in (MENSTRUAL_DAY, *LEAD_DAYS):
        rmse, mae = _stats(errors[key])
        rows.append(SequentialRow(lead=key, rmse=rmse, mae=mae, n_cycles=len(errors[key])))
    return rows


def calendar_eval(cycle_lengths, lengths=CALENDAR_LENGTHS) -> list:
    """
    Fixed-length baseline: predicting length L gives error L - actual
    for every cycle. Returns one row per candidate length.

    """
    actual = np.asarray(list(cycle_lengths), dtype=float)
    rows = []
    for L in lengths:
        e = L - actual
        rows.append(
            CalendarRow(
                length=int(L),
                rmse=float(np.sqrt(np.mean(e * e))) if actual.size else math.nan,
                mae=float(np.mean(np.abs(e))) if actual.size else math.nan,
            )
        )
    return rows


def evaluate(
    params: ModelParams,
    full_data: CycleDataset,
    n_train_cycles: int,
    grid: PhaseGrid,
) -> EvalReport:
    """
    Full accuracy report over the test cycles.

    The filter state is warm at test time (carried through the training
    days); the model conditions on everything observed so far. The
    reduction rate is (best calendar RMSE - best sequential RMSE) /
    best calendar RMSE, the maximum relative RMSE reduction the
    sequential method achieves over the best fixed prediction.

    """
    pairs = evaluation_cycles(full_data, n_train_cycles)
    seq_rows = sequential_eval(params, full_data, pairs, grid)
    lengths = [t_next - t_prev for t_prev, t_next in pairs]
    cal_rows = calendar_eval(lengths)
    best_cal = min(cal_rows, key=lambda r: r.rmse)
    seq_rmses = [r.rmse for r in seq_rows if r.n_cycles > 0]
    reduction = (best_cal.rmse - min(seq_rmses)) / best_cal.rmse if seq_rmses else math.nan
    return EvalReport(
        sequential=seq_rows,
        calendar=cal_rows,
        best_calendar=best_cal,
        reduction_rate=reduction,
        n_test_cycles=len(pairs),
    )
