"""
Predictive distributions for the day the next menstruation starts.

Conditional on today's phase omega, the onset falls on or before day
t + k exactly when the accumulated advance over k days (a gamma sum
with shape k * alpha) exceeds the remaining distance 1 - omega to the
wrap point. Mixing over the filtering distribution of the phase turns
this into a forecast conditional on everything observed so far.

"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .densities import _regularized_lower_gamma
from .model import ModelParams, PhaseGrid

# Horizon capture target: the forecast must account for all but this
# much probability mass, else the horizon is judged too short.
MASS_TOLERANCE = 1e-6

_AUTO_HORIZON_CAP = 1 << 16


class HorizonTooShortError(ValueError):
    """The requested horizon leaves more than MASS_TOLERANCE of mass uncaptured."""

    def __init__(self, k_max: int, mass: float):
        self.k_max = k_max
        self.mass = mass
        super().__init__(
            f"horizon k_max={k_max} captures only {mass:.9f} of the onset "
            "probability mass; enlarge the horizon"
        )


@dataclass(eq=False)
class OnsetForecast:
    """
    Forecast probabilities over horizons k = 1..k_max days ahead.

    ``probs[k-1]`` is the probability the next onset starts exactly k
    days from the forecast day. ``k_star`` is the point prediction, the
    smallest k attaining the maximum probability. ``mass_captured`` is
    the total mass inside the horizon.

    """

    probs: np.ndarray
    k_star: int
    mass_captured: float

    @property
    def k_max(self) -> int:
        return self.probs.size


def onset_cdf(k: int, omega: float, params: ModelParams) -> float:
    """
    Probability the next onset occurs on or before k days from now,
    given current phase omega: 1 - G(1 - omega; k*alpha, beta).

    k = 0 is defined as 0. Nondecreasing in both k and omega.

    """
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    if not (0.0 <= omega < 1.0):
        raise ValueError(f"omega must lie in [0, 1), got {omega!r}")
    if k == 0:
        return 0.0
    v = params.beta * (1.0 - omega)
    return float(1.0 - _regularized_lower_gamma(v, k * params.alpha))


def onset_pmf(k: int, omega: float, params: ModelParams) -> float:
    """Probability the next onset starts exactly k days from now, k >= 1."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    return onset_cdf(k, omega, params) - onset_cdf(k - 1, omega, params)


@lru_cache(maxsize=8)
def _pmf_table(alpha: float, beta: float, n: int, k_max: int) -> np.ndarray:
    """
    f(k | omega(i)) for k = 1..k_max over the n grid phases, shape
    (k_max, n). Cached: sequential evaluation reuses one fitted model
    across hundreds of forecast days.

    """
    omegas = np.arange(n) / n
    v = beta * (1.0 - omegas)
    onset_by = np.empty((k_max + 1, n))  # F(k | omega), with F(0) = 0
    onset_by[0] = 0.0
    for k in range(1, k_max + 1):
        onset_by[k] = 1.0 - _regularized_lower_gamma(v, k * alpha)
    pmf = onset_by[1:] - onset_by[:-1]
    np.clip(pmf, 0.0, None, out=pmf)
    return pmf


def default_horizon(params: ModelParams) -> int:
    """Initial horizon: three expected cycle lengths, clamped to [60, 365]."""
    return int(min(max(math.ceil(3.0 * params.beta / params.alpha), 60), 365))


def point_prediction(probs: np.ndarray) -> int:
    """Smallest k attaining the maximum probability (ties go to the earlier day)."""
    return int(np.argmax(probs)) + 1


def onset_marginal(
    fr_marginal: np.ndarray,
    grid: PhaseGrid,
    params: ModelParams,
    k_max: int | None = None,
) -> OnsetForecast:
    """
    Forecast mixing f(k | omega) over a filtering marginal.

    probs[k-1] = (1/N) * sum_i f(k | omega(i)) * fr_marginal[i].

    With ``k_max=None`` the horizon starts at ``default_horizon`` and
    doubles until all but MASS_TOLERANCE of the mass is captured. An
    explicit ``k_max`` that captures less raises HorizonTooShortError.

    """
    m = np.asarray(fr_marginal, dtype=float)
    if m.ndim != 1 or m.size != grid.n:
        raise ValueError(f"marginal must be a length-{grid.n} vector")
    if abs(m.mean() - 1.0) > 1e-6:
        raise ValueError("marginal is not normalized: (1/N) * sum must be 1")

    auto = k_max is None
    horizon = default_horizon(params) if auto else int(k_max)
    if horizon < 1:
        raise ValueError(f"k_max must be >= 1, got {horizon}")
    while True:
        pmf = _pmf_table(params.alpha, params.beta, grid.n, horizon)
        probs = pmf @ (m / grid.n)
        mass = float(probs.sum())
        if mass >= 1.0 - MASS_TOLERANCE:
            break
        if not auto:
            raise HorizonTooShortError(horizon, mass)
        if horizon >= _AUTO_HORIZON_CAP:
            raise HorizonTooShortError(horizon, mass)
        horizon *= 2
    return OnsetForecast(
        probs=probs, k_star=point_prediction(probs), mass_captured=min(mass, 1.0)
    )
