import numpy as np
import pytest

from bbtcycle.gridfilter import run_filter
from bbtcycle.model import ModelParams, PhaseGrid, mean_bbt
from bbtcycle.simulate import simulate


class TestSimulate:
    def test_deterministic_under_seed(self, subject2):
        a = simulate(subject2, 500, missing_rate=0.1, seed=42)
        b = simulate(subject2, 500, missing_rate=0.1, seed=42)
        assert np.array_equal(a.dataset.bbt, b.dataset.bbt, equal_nan=True)
        assert np.array_equal(a.dataset.menses, b.dataset.menses)
        assert np.array_equal(a.latent_phases, b.latent_phases)
        assert np.array_equal(a.latent_advances, b.latent_advances)
        c = simulate(subject2, 500, missing_rate=0.1, seed=43)
        assert not np.array_equal(a.dataset.bbt, c.dataset.bbt, equal_nan=True)

    def test_onsets_match_latent_wraps(self, subject2):
        sim = simulate(subject2, 2000, seed=1)
        om = sim.latent_phases
        assert np.array_equal(sim.dataset.menses, om[1:] <= om[:-1])

    def test_phase_recursion_consistency(self, subject2):
        sim = simulate(subject2, 300, seed=2)
        om = sim.latent_phases
        recon = (om[:-1] + sim.latent_advances) % 1.0
        assert np.allclose(recon, om[1:], atol=1e-12)

    def test_bbt_is_curve_plus_noise(self, subject2):
        sim = simulate(subject2, 3000, seed=3)
        resid = sim.dataset.bbt - mean_bbt(subject2, sim.latent_phases[1:])
        assert abs(resid.mean()) < 4.0 * subject2.sigma / np.sqrt(resid.size)
        assert resid.std() == pytest.approx(subject2.sigma, rel=0.1)

    def test_mean_cycle_length_matches_rate(self, subject2):
        sim = simulate(subject2, 10000, seed=0)
        lengths = sim.dataset.cycle_lengths()
        assert abs(lengths.mean() - 33.7) < 1.0

    def test_cycle_lengths_right_skewed_for_small_shape(self):
        p = ModelParams(alpha=0.210, beta=8.915, sigma=0.112, a=36.3, b=(0.19,), c=(-0.19,))
        sim = simulate(p, 40000, seed=3)
        lengths = sim.dataset.cycle_lengths().astype(float)
        assert lengths.size >= 300
        z = (lengths - lengths.mean()) / lengths.std()
        assert np.mean(z**3) > 0.0

    def test_missing_rate_applied(self, subject2):
        sim = simulate(subject2, 5000, missing_rate=0.3, seed=4)
        frac = np.mean(np.isnan(sim.dataset.bbt))
        assert frac == pytest.approx(0.3, abs=0.03)

    def test_rejects_cycle_per_day_advance(self):
        p = ModelParams(alpha=5.0, beta=4.0, sigma=0.1, a=36.0, b=(0.0,), c=(0.0,))
        with pytest.raises(ValueError):
            simulate(p, 100)

    def test_rejects_bad_args(self, subject2):
        with pytest.raises(ValueError):
            simulate(subject2, 0)
        with pytest.raises(ValueError):
            simulate(subject2, 10, missing_rate=1.0)

    def test_filter_tracks_latent_phase(self):
        # sharp temperature signal: the posterior mean phase should sit
        # within 0.05 of the latent truth on at least 90% of days
        p = ModelParams(alpha=0.953, beta=32.131, sigma=0.02, a=36.203, b=(0.197,), c=(-0.108,))
        sim = simulate(p, 300, seed=7)
        grid = PhaseGrid(256)
        fr = run_filter(p, sim.dataset, grid)
        ang = 2.0 * np.pi * grid.points
        mean_sin = (np.sin(ang) * fr.filter_marginals).mean(axis=1)
        mean_cos = (np.cos(ang) * fr.filter_marginals).mean(axis=1)
        post_mean = (np.arctan2(mean_sin, mean_cos) / (2.0 * np.pi)) % 1.0
        err = np.abs(post_mean - sim.latent_phases[1:])
        err = np.minimum(err, 1.0 - err)
        assert np.mean(err < 0.05) >= 0.9
