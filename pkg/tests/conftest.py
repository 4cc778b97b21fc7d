"""Shared fixtures and independent oracle implementations."""

import numpy as np
import pytest

from bbtcycle.model import CycleDataset, ModelParams, PhaseGrid, mean_bbt


@pytest.fixture
def subject2():
    """Parameters in the realistic range of a ~34-day cycle."""
    return ModelParams(
        alpha=0.953, beta=32.131, sigma=0.161, a=36.203, b=(0.197,), c=(-0.108,)
    )


def sample_grid_chain(params, grid, trans, n_days, seed, missing_rate=0.2):
    """
    Sample daily records from the discretized transition chain itself,
    so every observed sequence has positive probability on the grid.

    """
    rng = np.random.default_rng(seed)
    n = grid.n
    col_mass = trans.dens / n
    j = int(rng.integers(n))
    states = np.empty(n_days, dtype=int)
    menses = np.empty(n_days, dtype=bool)
    for t in range(n_days):
        i = int(rng.choice(n, p=col_mass[:, j]))
        states[t] = i
        menses[t] = bool(trans.wrap_mask[i, j])
        j = i
    omegas = grid.points[states]
    bbt = mean_bbt(params, omegas) + rng.normal(0.0, params.sigma, n_days)
    bbt[rng.random(n_days) < missing_rate] = np.nan
    return CycleDataset(bbt=bbt, menses=menses)


def dense_forward_backward(params, data, grid, trans):
    """
    Textbook forward-backward over the flattened N^2 pair state space.

    State s_t = (current phase i, previous phase j); transitions move
    (i1, j1) -> (i2, i1) with probability dens[i2, i1] / N. Returns the
    log evidence and the per-day smoothed state masses, shape (T, N, N).

    """
    n = grid.n
    dens = trans.dens
    mask = trans.wrap_mask
    mu = mean_bbt(params, grid.points)
    t_days = data.n_days

    a_mat = np.zeros((n * n, n * n))
    for i2 in range(n):
        for i1 in range(n):
            a_mat[i2 * n + i1, i1 * n : (i1 + 1) * n] = dens[i2, i1] / n
    pi = (dens / (n * n)).reshape(-1)

    def emission(t):
        y, z = data.bbt[t - 1], data.menses[t - 1]
        w = (mask if z else ~mask).astype(float)
        if not np.isnan(y):
            w = w * (
                np.exp(-0.5 * ((y - mu) / params.sigma) ** 2)
                / (params.sigma * np.sqrt(2.0 * np.pi))
            )[:, None]
        return w.reshape(-1)

    alphas = np.empty((t_days, n * n))
    norms = np.empty(t_days)
    a = pi * emission(1)
    norms[0] = a.sum()
    alphas[0] = a / norms[0]
    for t in range(2, t_days + 1):
        a = (a_mat @ alphas[t - 2]) * emission(t)
        norms[t - 1] = a.sum()
        alphas[t - 1] = a / norms[t - 1]
    loglik = float(np.log(norms).sum())

    gammas = np.empty((t_days, n * n))
    b = np.ones(n * n)
    g = alphas[-1]
    gammas[-1] = g / g.sum()
    for t in range(t_days - 1, 0, -1):
        b = a_mat.T @ (emission(t + 1) * b) / norms[t]
        g = alphas[t - 1] * b
        gammas[t - 1] = g / g.sum()
    return loglik, gammas.reshape(t_days, n, n)


def grid_matched_params(n):
    """Parameters whose cycle length (~n/3 days) suits an n-point grid."""
    cycle = n / 3.0
    return ModelParams(
        alpha=1.1, beta=1.1 * cycle, sigma=0.15, a=36.4, b=(0.2,), c=(-0.1,)
    )
