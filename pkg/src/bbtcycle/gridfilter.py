"""
Grid-based non-Gaussian filtering and smoothing over the circular phase.

The state tracked each day is the pair (current phase, previous phase),
discretized on an N x N grid; the pair is needed because the
menstruation indicator depends on whether the phase wrapped between
consecutive days. Densities are propagated with per-step renormalization
and the accumulated log-normalizers sum to the model log-likelihood.

Two execution modes:

* streaming (default) keeps only the current filtering marginal,
  O(N^2) memory; this is the path maximum-likelihood fitting hammers.
* retained keeps every day's joint predictive and filtering densities,
  O(T * N^2) memory, as required by the fixed-interval smoother.

"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import CycleDataset, ModelParams, PhaseGrid, TransitionTable, build_transition, mean_bbt

# Normalizers below this are treated as an impossible observation rather
# than silently renormalized noise.
DEGENERATE_FLOOR = 1e-300

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class DegenerateLikelihoodError(ArithmeticError):
    """The day's observation has (numerically) zero probability under the model."""

    def __init__(self, day: int, normalizer: float):
        self.day = day
        self.normalizer = normalizer
        super().__init__(
            f"observation on day {day} is impossible under the current state "
            f"distribution (normalizer {normalizer:.3e})"
        )


@dataclass(eq=False)
class JointDensity:
    """Joint density over (current phase i, previous phase j) for one day."""

    vals: np.ndarray
    t: int

    @property
    def current_marginal(self) -> np.ndarray:
        """Marginal density of the current phase, (1/N) sum over j."""
        return self.vals.mean(axis=1)


@dataclass(eq=False)
class FilterResult:
    """
    Output of one filtering pass.

    ``filter_marginals[t-1]`` is the filtering density of the day-t
    phase on the grid; ``step_loglik[t-1]`` is log c_t, the log
    probability of day t's observation given days 1..t-1. In retained
    mode ``predictive`` and ``filtering`` hold the per-day joints.

    """

    grid: PhaseGrid
    step_loglik: np.ndarray
    filter_marginals: np.ndarray
    total_loglik: float
    predictive: list[JointDensity] | None = None
    filtering: list[JointDensity] | None = None

    @property
    def n_days(self) -> int:
        return self.step_loglik.size

    @property
    def retained(self) -> bool:
        return self.filtering is not None


def _bbt_likelihood_row(y: float, mu: np.ndarray, sigma: float) -> np.ndarray:
    z = (y - mu) / sigma
    return np.exp(-0.5 * z * z - math.log(sigma) - _LOG_SQRT_2PI)


def predict_step(prev_filter_marginal: np.ndarray, trans: TransitionTable, t: int = 0) -> JointDensity:
    """
    One-step-ahead joint predictive density.

    vals[i, j] = dens[i, j] * prev_filter_marginal[j]; with a normalized
    input marginal the output integrates to 1 under (1/N^2) summation
    because the transition columns are mass-normalized.

    """
    m = np.asarray(prev_filter_marginal, dtype=float)
    return JointDensity(vals=trans.dens * m[None, :], t=t)


def filter_step(
    pred: JointDensity,
    y: float | None,
    z: bool,
    params: ModelParams,
    grid: PhaseGrid,
    trans: TransitionTable,
) -> tuple[JointDensity, float]:
    """
    Condition the predictive joint on one day's observations.

    The weight on cell (i, j) is the BBT density at phase i (1 when the
    temperature is missing) times the onset indicator: wrapping moves
    (omega_i <= omega_j) are kept when z is true, strictly advancing
    moves otherwise. Returns the conditioned joint and log c, the log
    normalizer, which is the day's contribution to the log-likelihood.

    """
    n = grid.n
    if z:
        w = trans.wrap_mask.astype(float)
    else:
        w = (~trans.wrap_mask).astype(float)
    if y is not None and not (isinstance(y, float) and math.isnan(y)):
        mu = mean_bbt(params, grid.points)
        w = w * _bbt_likelihood_row(float(y), mu, params.sigma)[:, None]
    vals = w * pred.vals
    c = vals.sum() / (n * n)
    if not (c > DEGENERATE_FLOOR) or not math.isfinite(c):
        raise DegenerateLikelihoodError(pred.t, float(c))
    return JointDensity(vals=vals / c, t=pred.t), math.log(c)


def run_filter(
    params: ModelParams,
    data: CycleDataset,
    grid: PhaseGrid,
    keep_joints: bool = False,
    trans: TransitionTable | None = None,
) -> FilterResult:
    """
    Filter a full daily record, starting from a uniform phase prior.

    The initial previous-phase marginal is the uniform density (the
    first observed onset collapses the posterior within one cycle, so
    nothing sharper is needed). Total log-likelihood is the sum of the
    per-day log normalizers.

    Raises DegenerateLikelihoodError with the offending day index if an
    observation is impossible under the current state distribution.

    """
    if trans is None:
        trans = build_transition(params, grid)
    n = grid.n
    t_days = data.n_days
    mu = mean_bbt(params, grid.points)
    sigma = params.sigma
    bbt = data.bbt
    menses = data.menses

    step_loglik = np.empty(t_days)
    marginals = np.empty((t_days, n))

    if keep_joints:
        predictive: list[JointDensity] | None = []
        filtering: list[JointDensity] | None = []
        m = np.ones(n)
        for t in range(1, t_days + 1):
            pred = predict_step(m, trans, t=t)
            y = bbt[t - 1]
            filt, logc = filter_step(
                pred, None if np.isnan(y) else float(y), bool(menses[t - 1]), params, grid, trans
            )
            m = filt.current_marginal
            predictive.append(pred)
            filtering.append(filt)
            step_loglik[t - 1] = logc
            marginals[t - 1] = m
    else:
        predictive = filtering = None
        # Streaming recursion on the marginal alone: the joint never has
        # to be materialized because the day's weight factorizes into a
        # row term (BBT) and the wrap/no-wrap split of the transition
        # matrix. One masked matrix-vector product per day.
        advance = trans.dens * ~trans.wrap_mask
        wrap = trans.dens * trans.wrap_mask
        observed = ~np.isnan(bbt)
        rows = np.empty((t_days, n))
        if observed.any():
            z = (bbt[observed, None] - mu[None, :]) / sigma
            rows[observed] = np.exp(-0.5 * z * z - math.log(sigma) - _LOG_SQRT_2PI)
        m = np.ones(n)
        n2 = float(n * n)
        for t in range(1, t_days + 1):
            q = (wrap if menses[t - 1] else advance) @ m
            if observed[t - 1]:
                q = q * rows[t - 1]
            c = q.sum() / n2
            if not (c > DEGENERATE_FLOOR) or not math.isfinite(c):
                raise DegenerateLikelihoodError(t, float(c))
            m = q / (n * c)
            step_loglik[t - 1] = math.log(c)
            marginals[t - 1] = m

    return FilterResult(
        grid=grid,
        step_loglik=step_loglik,
        filter_marginals=marginals,
        total_loglik=float(step_loglik.sum()),
        predictive=predictive,
        filtering=filtering,
    )


def smooth(fr: FilterResult, trans: TransitionTable) -> list[JointDensity]:
    """
    Fixed-interval smoothed joints for every day, by backward recursion.

    At t = T the smoothed joint is the filtering joint; going backward,
    each filtering joint's current-phase rows are reweighted by the
    ratio of the next day's smoothed previous-phase marginal to the
    day's filtering marginal (rows with zero filtering marginal stay
    zero). Each smoothed joint is renormalized so its (1/N^2) sum is 1.

    Requires a retained-mode FilterResult.

    """
    if not fr.retained:
        raise ValueError("smoothing requires run_filter(..., keep_joints=True)")
    assert fr.filtering is not None
    t_days = fr.n_days
    out: list[JointDensity] = [None] * t_days  # type: ignore[list-item]
    last = fr.filtering[-1].vals.copy()
    last /= last.mean()
    out[t_days - 1] = JointDensity(vals=last, t=t_days)
    for t in range(t_days - 1, 0, -1):
        # marginal over the next day's current phase leaves a function
        # of the day-t phase, indexed by the previous-phase axis
        sprime = out[t].vals.mean(axis=0)
        fprime = fr.filter_marginals[t - 1]
        ratio = np.divide(sprime, fprime, out=np.zeros_like(sprime), where=fprime > 0)
        vals = fr.filtering[t - 1].vals * ratio[:, None]
        total = vals.mean()
        if not (total > 0) or not math.isfinite(total):
            raise ArithmeticError(f"smoothed density degenerated at day {t}")
        out[t - 1] = JointDensity(vals=vals / total, t=t)
    return out


def smoothed_marginals(joints: list[JointDensity]) -> np.ndarray:
    """Per-day smoothed density of the day's phase, shape (T, N)."""
    return np.stack([j.current_marginal for j in joints])
