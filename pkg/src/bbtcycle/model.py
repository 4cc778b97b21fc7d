"""
Core model objects: the parameter vector, the phase grid and discretized
transition table, the harmonic mean-temperature curve, and daily records.

The latent menstrual phase lives on the unit circle [0, 1); one full
revolution is one cycle and menstruation onset is the wrap past 1. Daily
phase advances are gamma distributed, so the one-day transition density
on the circle is the wrapped gamma density.

"""

from __future__ import annotations

import datetime
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .densities import wrapped_advance_cdf

logger = logging.getLogger(__name__)

# Self-reported temperatures outside this window are treated as typos and
# converted to missing on ingestion rather than rejected.
BBT_SANITY_WINDOW = (34.0, 42.0)


@dataclass(frozen=True)
class ModelParams:
    """
    Full parameter vector of the cycle model.

    Attributes
    ----------
    alpha, beta : float
        Shape and rate of the gamma-distributed daily phase advance;
        the mean advance per day is alpha/beta.
    sigma : float
        Standard deviation of the BBT observation noise (deg C).
    a : float
        BBT intercept (deg C).
    b, c : tuple of float
        Cosine and sine coefficients of the harmonic temperature curve,
        one pair per harmonic order; must have equal length M >= 1.

    """

    alpha: float
    beta: float
    sigma: float
    a: float
    b: tuple[float, ...]
    c: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        object.__setattr__(self, "c", tuple(float(x) for x in self.c))
        for name in ("alpha", "beta", "sigma"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        object.__setattr__(self, "a", float(self.a))
        if len(self.b) != len(self.c) or len(self.b) < 1:
            raise ValueError(
                f"b and c must have identical length >= 1, got {len(self.b)} and {len(self.c)}"
            )
        coeffs = (self.a,) + self.b + self.c
        if not all(math.isfinite(x) for x in coeffs):
            raise ValueError("temperature coefficients must all be finite")

    @property
    def order(self) -> int:
        """Harmonic order M."""
        return len(self.b)

    @property
    def n_params(self) -> int:
        """Number of free parameters, 2M + 4."""
        return 2 * self.order + 4


@dataclass(frozen=True)
class PhaseGrid:
    """
    N equally spaced phase points omega(i) = i/N, i = 0..N-1.

    Placing points on left endpoints puts omega = 0 (onset) exactly on
    the grid and makes every pairwise circular advance fall in (0, 1].

    """

    n: int

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ValueError(f"grid size must be an integer >= 2, got {self.n!r}")

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    @property
    def cell_width(self) -> float:
        return 1.0 / self.n


@dataclass(frozen=True, eq=False)
class TransitionTable:
    """
    One-day phase transition density evaluated on the grid.

    ``dens[i, j]`` is the (column-renormalized) density of moving to
    phase point i from phase point j in one day; ``wrap_mask[i, j]`` is
    True where omega(i) <= omega(j), i.e. where the move wraps past 1
    and menstruation starts.

    ``raw_mass`` records the quadrature mass (1/N) * sum_i dens[i, j]
    before renormalization (identical for every column by circulant
    symmetry); values noticeably far from 1 indicate a grid too coarse
    for the advance distribution.

    """

    dens: np.ndarray
    wrap_mask: np.ndarray
    raw_mass: float

    @property
    def n(self) -> int:
        return self.dens.shape[0]


def mean_bbt(params: ModelParams, omega):
    """
    Harmonic mean temperature mu(omega), periodic with period 1.

    Parameters
    ----------
    params : ModelParams
    omega : float or ndarray
        Phase; reduced modulo 1, so callers may pass any real value.

    """
    om = np.asarray(omega, dtype=float) % 1.0
    orders = np.arange(1, params.order + 1)
    ang = 2.0 * np.pi * np.multiply.outer(om, orders)
    out = params.a + np.cos(ang) @ np.asarray(params.b) + np.sin(ang) @ np.asarray(params.c)
    if np.isscalar(omega) or np.asarray(omega).ndim == 0:
        return float(out)
    return out


def build_transition(params: ModelParams, grid: PhaseGrid) -> TransitionTable:
    """
    Discretize the wrapped gamma transition density on the grid.

    Entry (i, j) is the average density over the circular-advance cell
    that grid move j -> i represents: exact wrap-sum gamma mass over
    the cell, divided by the cell width. An advance of m cells covers
    delta in ((m - 1/2)/N, (m + 1/2)/N], the one-cell move additionally
    absorbs the sub-half-cell mass (advances too small to change cell,
    which cannot wrap), and the diagonal (delta = 1, coincident phases)
    covers ((N - 1/2)/N, 1]. Cell masses rather than pointwise density
    values matter here: for shape < 1 the density is singular at 0+ and
    pointwise evaluation misplaces several percent of the one-day mass,
    which is enough to visibly bias maximum-likelihood estimates.

    Each column is then rescaled so its mass (1/N) * sum_i is exactly 1
    to machine precision; the raw mass is already 1 up to the truncated
    wrap tail and is recorded as a diagnostic.

    """
    n = grid.n
    edges = np.concatenate([[0.0], (np.arange(1, n) + 0.5) / n, [1.0]])
    cumulative = wrapped_advance_cdf(edges, params.alpha, params.beta)
    masses = np.diff(cumulative)
    raw_mass = float(masses.sum())
    if not (raw_mass > 0.0 and math.isfinite(raw_mass)):
        raise ValueError(
            f"transition mass {raw_mass!r} is unusable; "
            "check alpha/beta against the grid size"
        )
    masses /= raw_mass

    # advances[d] = density for a move of d cells, d = 0 meaning the
    # full-wrap diagonal; dens is circulant in (i - j) mod N
    advances = np.empty(n)
    advances[1:] = masses[:-1] * n
    advances[0] = masses[-1] * n
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    dens = advances[idx]
    wrap_mask = np.arange(n)[:, None] <= np.arange(n)[None, :]
    return TransitionTable(dens=dens, wrap_mask=wrap_mask, raw_mass=raw_mass)


def expected_cycle_length(params: ModelParams) -> float:
    """Mean days per cycle: the phase advances alpha/beta per day on average."""
    return params.beta / params.alpha


@dataclass(eq=False)
class CycleDataset:
    """
    Daily records for one subject.

    Attributes
    ----------
    bbt : ndarray of float
        Daily temperature (deg C), NaN where missing. Values outside
        BBT_SANITY_WINDOW are converted to missing with a logged warning.
    menses : ndarray of bool
        True on days menstruation started. Required every day; a day
        without a temperature reading is still a record.
    subject_id : str
    start_date : datetime.date, optional
        Calendar date of the first record; dates are consecutive.

    """

    bbt: np.ndarray
    menses: np.ndarray
    subject_id: str = "subject"
    start_date: datetime.date | None = None

    def __post_init__(self):
        bbt = np.array(self.bbt, dtype=float)
        menses = np.asarray(self.menses)
        if menses.dtype != np.bool_:
            vals = np.asarray(menses)
            if not np.isin(vals, (0, 1)).all():
                raise ValueError("menses entries must be 0 or 1")
            menses = vals.astype(bool)
        if bbt.ndim != 1 or menses.ndim != 1 or bbt.shape != menses.shape:
            raise ValueError("bbt and menses must be 1-d arrays of equal length")
        if bbt.size < 1:
            raise ValueError("dataset must contain at least one day")
        lo, hi = BBT_SANITY_WINDOW
        wild = np.isfinite(bbt) & ((bbt < lo) | (bbt > hi))
        if wild.any():
            logger.warning(
                "%s: %d BBT value(s) outside [%.1f, %.1f] treated as missing",
                self.subject_id,
                int(wild.sum()),
                lo,
                hi,
            )
            bbt[wild] = np.nan
        self.bbt = bbt
        self.menses = menses

    @property
    def n_days(self) -> int:
        return self.bbt.size

    def onsets(self) -> np.ndarray:
        """0-based day indices on which menstruation started."""
        return np.flatnonzero(self.menses)

    def cycle_lengths(self) -> np.ndarray:
        """Observed onset-to-onset lengths, in days."""
        return np.diff(self.onsets())

    def date_of(self, day_index: int) -> datetime.date:
        if self.start_date is None:
            raise ValueError("dataset carries no calendar dates")
        return self.start_date + datetime.timedelta(days=int(day_index))

    def day_of(self, date: datetime.date) -> int:
        if self.start_date is None:
            raise ValueError("dataset carries no calendar dates")
        return (date - self.start_date).days

    def slice(self, start: int, stop: int) -> "CycleDataset":
        """Contiguous sub-series over day indices [start, stop)."""
        if not (0 <= start < stop <= self.n_days):
            raise ValueError(f"invalid slice [{start}, {stop}) for {self.n_days} days")
        sd = None
        if self.start_date is not None:
            sd = self.start_date + datetime.timedelta(days=start)
        return CycleDataset(
            bbt=self.bbt[start:stop].copy(),
            menses=self.menses[start:stop].copy(),
            subject_id=self.subject_id,
            start_date=sd,
        )
