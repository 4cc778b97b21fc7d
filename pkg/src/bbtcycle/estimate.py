"""
Maximum-likelihood fitting, AIC harmonic-order selection, and Wald
confidence intervals.

The grid-filter likelihood has no analytic gradient, so fitting is
derivative-free simplex search in a transformed space (log for the
positive parameters, identity for the temperature coefficients), with
jittered restarts. All randomness is seeded: a fixed seed and config
reproduce the fit bit for bit.

"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .gridfilter import DegenerateLikelihoodError, run_filter
from .model import CycleDataset, ModelParams, PhaseGrid, expected_cycle_length

# Fits implying a mean cycle length outside this window (days) are flagged
# as degenerate: near-flat advance distributions make every forecast flat.
DEGENERATE_CYCLE_WINDOW = (10.0, 120.0)

MAX_ORDER = 12


class NonConvergenceError(RuntimeError):
    """No optimizer start produced a usable optimum."""


class DegenerateFitError(RuntimeError):
    """The fitted advance distribution implies an implausible cycle length."""

    def __init__(self, fit: "FitResult"):
        self.fit = fit
        ecl = expected_cycle_length(fit.params)
        lo, hi = DEGENERATE_CYCLE_WINDOW
        super().__init__(
            f"fitted mean cycle length {ecl:.1f} days falls outside [{lo:g}, {hi:g}]"
        )


@dataclass(frozen=True)
class OptConfig:
    """
    Optimizer settings.

    ``restarts`` counts additional jittered starts beyond the
    moment-based initial point; ``initial`` overrides that initial
    point. Every start is followed by up to ``polish_rounds`` simplex
    reinitializations at the found optimum, which dislodges the
    premature-contraction stalls plain Nelder-Mead is prone to.

    """

    restarts: int = 3
    seed: int = 0
    fatol: float = 1e-7
    xatol: float = 1e-5
    max_iterations: int | None = None
    jitter: float = 0.3
    polish_rounds: int = 2
    polish_tol: float = 1e-6
    initial: ModelParams | None = None


@dataclass(eq=False)
class OptimizerTrace:
    iterations: int
    fevals: int
    converged: bool
    n_starts: int
    best_start: int
    simplex_spread: float
    message: str


@dataclass(eq=False)
class FitResult:
    params: ModelParams
    loglik: float
    aic: float
    n_params: int
    trace: OptimizerTrace
    ci: dict | None = None

    @property
    def order(self) -> int:
        return self.params.order


@dataclass(eq=False)
class OrderScanRow:
    order: int
    aic: float
    loglik: float
    converged: bool
    error: str | None = None


@dataclass(eq=False)
class OrderSelection:
    best: FitResult
    rows: list


def pack(params: ModelParams) -> np.ndarray:
    """Transform to the unconstrained search space."""
    return np.concatenate(
        [
            [math.log(params.alpha), math.log(params.beta), math.log(params.sigma), params.a],
            params.b,
            params.c,
        ]
    )


def unpack(eta: np.ndarray, order: int) -> ModelParams:
    """Inverse of ``pack``; raises ValueError on non-finite results."""
    eta = np.asarray(eta, dtype=float)
    if eta.size != 2 * order + 4:
        raise ValueError(f"expected {2 * order + 4} coordinates, got {eta.size}")
    with np.errstate(over="raise"):
        alpha, beta, sigma = np.exp(eta[:3])
    return ModelParams(
        alpha=float(alpha),
        beta=float(beta),
        sigma=float(sigma),
        a=float(eta[3]),
        b=tuple(eta[4 : 4 + order]),
        c=tuple(eta[4 + order :]),
    )


def param_names(order: int) -> list[str]:
    return (
        ["alpha", "beta", "sigma", "a"]
        + [f"b{m}" for m in range(1, order + 1)]
        + [f"c{m}" for m in range(1, order + 1)]
    )


def default_initial(data: CycleDataset, order: int) -> ModelParams:
    """
    Moment-based starting point: unit-shape advance with rate matching
    the observed mean cycle length, intercept and noise from the BBT
    sample moments, flat harmonics.

    """
    lengths = data.cycle_lengths()
    if lengths.size < 1:
        raise ValueError("need at least two onsets to anchor the initial cycle length")
    beta0 = float(lengths.mean())
    observed = data.bbt[np.isfinite(data.bbt)]
    a0 = float(observed.mean()) if observed.size else 36.5
    sigma0 = float(observed.std()) if observed.size else 0.3
    sigma0 = max(sigma0, 0.02)
    zeros = (0.0,) * order
    return ModelParams(alpha=1.0, beta=beta0, sigma=sigma0, a=a0, b=zeros, c=zeros)


def _negative_loglik(eta, data, grid, order):
    try:
        params = unpack(eta, order)
        return -run_filter(params, data, grid).total_loglik
    except (ValueError, ArithmeticError, FloatingPointError):
        return math.inf


def fit(
    data: CycleDataset,
    order: int,
    grid: PhaseGrid,
    cfg: OptConfig | None = None,
) -> FitResult:
    """
    Maximize the filter log-likelihood over the parameter vector.

    Requires at least two onsets (one complete cycle) and a harmonic
    order in [1, MAX_ORDER]. Raises NonConvergenceError when every
    start fails outright and DegenerateFitError when the optimum
    implies a mean cycle length outside DEGENERATE_CYCLE_WINDOW (the
    offending result rides on the exception's ``fit`` attribute).

    """
    if not isinstance(order, (int, np.integer)) or not (1 <= order <= MAX_ORDER):
        raise ValueError(f"harmonic order must be an integer in [1, {MAX_ORDER}], got {order!r}")
    if data.onsets().size < 2:
        raise ValueError("fitting requires at least two recorded onsets")
    cfg = cfg or OptConfig()

    x0 = pack(cfg.initial if cfg.initial is not None else default_initial(data, order))
    dim = x0.size
    scales = np.concatenate(
        [[cfg.jitter] * 3, [0.3 * cfg.jitter], np.full(2 * order, 0.15 * cfg.jitter)]
    )
    rng = np.random.default_rng(cfg.seed)
    starts = [x0] + [x0 + rng.normal(0.0, scales) for _ in range(cfg.restarts)]

    maxiter = cfg.max_iterations or max(2000, 300 * dim)
    options = {
        "maxiter": maxiter,
        "maxfev": maxiter,
        "fatol": cfg.fatol,
        "xatol": cfg.xatol,
        "adaptive": dim > 8,
    }

    def run_start(x_start):
        res = minimize(
            _negative_loglik,
            x_start,
            args=(data, grid, order),
            method="Nelder-Mead",
            options=options,
        )
        nit, nfev = int(res.nit), int(res.nfev)
        for _ in range(cfg.polish_rounds):
            if not math.isfinite(res.fun):
                break
            again = minimize(
                _negative_loglik,
                res.x,
                args=(data, grid, order),
                method="Nelder-Mead",
                options=options,
            )
            nit += int(again.nit)
            nfev += int(again.nfev)
            improved = res.fun - again.fun
            if again.fun <= res.fun:
                res = again
            if improved < cfg.polish_tol:
                break
        return res, nit, nfev

    results = [run_start(x_start) for x_start in starts]
    usable = [(i, r) for i, r in enumerate(results) if math.isfinite(r[0].fun)]
    if not usable:
        raise NonConvergenceError(
            f"all {len(starts)} optimizer starts failed to reach a finite likelihood"
        )
    best_start, (best, total_nit, total_nfev) = min(usable, key=lambda ir: ir[1][0].fun)

    spread = float(np.max(best.final_simplex[1]) - np.min(best.final_simplex[1]))
    trace = OptimizerTrace(
        iterations=total_nit,
        fevals=total_nfev,
        converged=bool(best.success),
        n_starts=len(starts),
        best_start=best_start,
        simplex_spread=spread,
        message=str(best.message),
    )
    params = unpack(best.x, order)
    loglik = -float(best.fun)
    result = FitResult(
        params=params,
        loglik=loglik,
        aic=-2.0 * loglik + 2.0 * params.n_params,
        n_params=params.n_params,
        trace=trace,
    )
    lo, hi = DEGENERATE_CYCLE_WINDOW
    if not (lo <= expected_cycle_length(params) <= hi):
        raise DegenerateFitError(result)
    return result


def select_order(
    data: CycleDataset,
    grid: PhaseGrid,
    orders=range(1, MAX_ORDER + 1),
    cfg: OptConfig | None = None,
) -> OrderSelection:
    """
    Fit every harmonic order and keep the minimum-AIC model.

    Orders whose fit fails are recorded with the failure reason and
    skipped; only if every order fails does the scan raise.

    """
    rows: list[OrderScanRow] = []
    best: FitResult | None = None
    for order in orders:
        try:
            r = fit(data, int(order), grid, cfg)
        except (NonConvergenceError, DegenerateFitError, DegenerateLikelihoodError, ValueError) as e:
            rows.append(
                OrderScanRow(order=int(order), aic=math.nan, loglik=math.nan, converged=False, error=str(e))
            )
            continue
        rows.append(
            OrderScanRow(order=int(order), aic=r.aic, loglik=r.loglik, converged=r.trace.converged)
        )
        if best is None or r.aic < best.aic:
            best = r
    if best is None:
        raise NonConvergenceError("every harmonic order in the scan failed to fit")
    return OrderSelection(best=best, rows=rows)


def confidence_intervals(
    fit_result: FitResult,
    data: CycleDataset,
    grid: PhaseGrid,
    step: float = 5e-4,
) -> dict:
    """
    95% Wald intervals from a central-difference Hessian of the negative
    log-likelihood in the transformed space.

    alpha, beta, and sigma get log-scale intervals mapped back by
    exponentiation (hence asymmetric); the temperature coefficients are
    plain. Parameters whose curvature is unusable (singular Hessian,
    non-positive variance) are reported as None instead of failing.

    """
    params = fit_result.params
    order = params.order
    eta = pack(params)
    dim = eta.size

    def f(x):
        return _negative_loglik(x, data, grid, order)

    h = step * np.maximum(1.0, np.abs(eta))
    f0 = f(eta)
    hess = np.empty((dim, dim))
    for i in range(dim):
        ei = np.zeros(dim)
        ei[i] = h[i]
        hess[i, i] = (f(eta + ei) - 2.0 * f0 + f(eta - ei)) / h[i] ** 2
        for j in range(i + 1, dim):
            ej = np.zeros(dim)
            ej[j] = h[j]
            hess[i, j] = hess[j, i] = (
                f(eta + ei + ej) - f(eta + ei - ej) - f(eta - ei + ej) + f(eta - ei - ej)
            ) / (4.0 * h[i] * h[j])

    names = param_names(order)
    out: dict = {}
    try:
        cov = np.linalg.inv(hess)
        variances = np.diag(cov)
    except np.linalg.LinAlgError:
        variances = np.full(dim, np.nan)
    for k, name in enumerate(names):
        var = variances[k]
        if not np.isfinite(var) or var <= 0.0:
            out[name] = None
            continue
        half = 1.959963984540054 * math.sqrt(var)
        lo, hi = eta[k] - half, eta[k] + half
        if k < 3:
            lo, hi = math.exp(lo), math.exp(hi)
        out[name] = (float(lo), float(hi))
    return out
