import math

import numpy as np
import pytest

from bbtcycle.gridfilter import (
    DegenerateLikelihoodError,
    JointDensity,
    filter_step,
    predict_step,
    run_filter,
    smooth,
    smoothed_marginals,
)
from bbtcycle.model import CycleDataset, ModelParams, PhaseGrid, build_transition, mean_bbt
from bbtcycle.densities import normal_pdf

from conftest import dense_forward_backward, grid_matched_params, sample_grid_chain


class TestPredictStep:
    def test_uniform_marginal_reproduces_transition(self, subject2):
        grid = PhaseGrid(32)
        trans = build_transition(subject2, grid)
        pred = predict_step(np.ones(32), trans)
        assert np.array_equal(pred.vals, trans.dens)

    def test_point_mass_conditions_on_column(self, subject2):
        grid = PhaseGrid(16)
        trans = build_transition(subject2, grid)
        m = np.zeros(16)
        m[5] = 16.0
        pred = predict_step(m, trans)
        assert np.allclose(pred.vals[:, 5], 16.0 * trans.dens[:, 5])
        other = np.delete(pred.vals, 5, axis=1)
        assert np.all(other == 0.0)

    def test_normalization_preserved(self, subject2):
        grid = PhaseGrid(64)
        trans = build_transition(subject2, grid)
        rng = np.random.default_rng(0)
        m = rng.random(64)
        m /= m.mean()
        pred = predict_step(m, trans)
        assert pred.vals.mean() == pytest.approx(1.0, abs=1e-12)


class TestFilterStep:
    def test_uninformative_day_passthrough(self, subject2):
        grid = PhaseGrid(32)
        trans = build_transition(subject2, grid)
        vals = trans.dens * ~trans.wrap_mask  # advancing pairs only
        vals = vals / vals.mean()
        pred = JointDensity(vals=vals, t=1)
        out, log_c = filter_step(pred, None, False, subject2, grid, trans)
        assert abs(log_c) < 1e-12
        assert np.allclose(out.vals, pred.vals, rtol=1e-12)

    def test_onset_indicator_zeroes_complement(self, subject2):
        grid = PhaseGrid(16)
        trans = build_transition(subject2, grid)
        pred = predict_step(np.ones(16), trans, t=1)
        kept, _ = filter_step(pred, None, True, subject2, grid, trans)
        assert np.all(kept.vals[~trans.wrap_mask] == 0.0)
        kept, _ = filter_step(pred, None, False, subject2, grid, trans)
        assert np.all(kept.vals[trans.wrap_mask] == 0.0)

    def test_small_grid_hand_computation(self, subject2):
        # N=4, uniform predictive, observed temperature: the filtered
        # joint is the hand-normalized elementwise product
        grid = PhaseGrid(4)
        trans = build_transition(subject2, grid)
        pred = JointDensity(vals=np.ones((4, 4)), t=1)
        y = 36.3
        out, log_c = filter_step(pred, y, False, subject2, grid, trans)
        w = np.array(
            [normal_pdf(y, mean_bbt(subject2, om), subject2.sigma) for om in grid.points]
        )[:, None] * (~trans.wrap_mask)
        expected_c = w.sum() / 16.0
        assert log_c == pytest.approx(math.log(expected_c), rel=1e-13)
        assert np.allclose(out.vals, w / expected_c, rtol=1e-12)

    def test_impossible_observation_raises(self, subject2):
        grid = PhaseGrid(16)
        trans = build_transition(subject2, grid)
        vals = trans.dens * ~trans.wrap_mask
        vals = vals / vals.mean()
        pred = JointDensity(vals=vals, t=7)
        with pytest.raises(DegenerateLikelihoodError) as exc:
            filter_step(pred, None, True, subject2, grid, trans)
        assert exc.value.day == 7


class TestRunFilter:
    def test_single_silent_day(self, subject2):
        # no temperature, no onset: the step log-likelihood is the log
        # probability of not wrapping, computed independently
        grid = PhaseGrid(64)
        trans = build_transition(subject2, grid)
        data = CycleDataset(bbt=np.array([np.nan]), menses=np.array([False]))
        fr = run_filter(subject2, data, grid, trans=trans)
        no_wrap = (trans.dens * ~trans.wrap_mask).sum() / (64.0 * 64.0)
        assert fr.total_loglik == pytest.approx(math.log(no_wrap), rel=1e-12)
        assert fr.total_loglik < 0.0

    def test_silent_days_accumulate_monotonically(self, subject2):
        grid = PhaseGrid(64)
        data = CycleDataset(bbt=np.full(30, np.nan), menses=np.zeros(30, dtype=bool))
        fr = run_filter(subject2, data, grid)
        totals = np.cumsum(fr.step_loglik)
        assert np.all(np.diff(totals) < 0.0)
        # z-only step normalizers are probabilities, not densities
        assert np.all(np.exp(fr.step_loglik) <= 1.0)
        assert np.all(np.exp(fr.step_loglik) >= 0.0)

    def test_total_is_sum_of_steps(self, subject2):
        grid = PhaseGrid(64)
        trans = build_transition(subject2, grid)
        data = sample_grid_chain(subject2, grid, trans, 80, seed=2)
        fr = run_filter(subject2, data, grid, trans=trans)
        assert fr.total_loglik == float(fr.step_loglik.sum())

    def test_marginals_normalized(self, subject2):
        grid = PhaseGrid(64)
        trans = build_transition(subject2, grid)
        data = sample_grid_chain(subject2, grid, trans, 60, seed=3)
        fr = run_filter(subject2, data, grid, trans=trans)
        assert np.max(np.abs(fr.filter_marginals.mean(axis=1) - 1.0)) < 1e-9

    def test_streaming_equals_retained(self, subject2):
        grid = PhaseGrid(48)
        trans = build_transition(subject2, grid)
        data = sample_grid_chain(subject2, grid, trans, 70, seed=4)
        fr_s = run_filter(subject2, data, grid, trans=trans)
        fr_r = run_filter(subject2, data, grid, keep_joints=True, trans=trans)
        assert fr_s.total_loglik == pytest.approx(fr_r.total_loglik, rel=1e-12)
        assert np.allclose(fr_s.filter_marginals, fr_r.filter_marginals, atol=1e-10)
        assert fr_r.retained and not fr_s.retained

    @pytest.mark.parametrize("n,t_days", [(8, 40), (16, 60)])
    def test_dense_oracle_equivalence(self, n, t_days):
        params = grid_matched_params(n)
        grid = PhaseGrid(n)
        trans = build_transition(params, grid)
        data = sample_grid_chain(params, grid, trans, t_days, seed=n)
        fr = run_filter(params, data, grid, trans=trans)
        loglik, _ = dense_forward_backward(params, data, grid, trans)
        assert fr.total_loglik == pytest.approx(loglik, abs=1e-8)

    def test_onset_resets_phase_to_low_values(self, subject2):
        grid = PhaseGrid(512)
        bbt = np.full(40, np.nan)
        menses = np.zeros(40, dtype=bool)
        menses[[0, 33]] = True
        fr = run_filter(subject2, CycleDataset(bbt=bbt, menses=menses), grid)
        for day in (0, 33):
            low = fr.filter_marginals[day][grid.points < 0.25].sum() / grid.n
            assert low >= 0.99

    def test_step_decomposition_under_prepended_block(self, subject2):
        # prepending silent days leaves the total equal to the sum of
        # all per-day terms; the split into old and new days is exact
        # within the combined run
        grid = PhaseGrid(64)
        trans = build_transition(subject2, grid)
        data = sample_grid_chain(subject2, grid, trans, 50, seed=5)
        k = 10
        combined = CycleDataset(
            bbt=np.concatenate([np.full(k, np.nan), data.bbt]),
            menses=np.concatenate([np.zeros(k, dtype=bool), data.menses]),
        )
        fr = run_filter(subject2, combined, grid, trans=trans)
        new_days = float(fr.step_loglik[:k].sum())
        old_days = float(fr.step_loglik[k:].sum())
        assert fr.total_loglik == pytest.approx(new_days + old_days, abs=1e-12)

    def test_degenerate_day_reported_with_index(self, subject2):
        # a cycle longer than the grid cannot advance without wrapping:
        # every no-onset day forces at least one cell forward
        grid = PhaseGrid(16)
        bbt = np.full(40, np.nan)
        menses = np.zeros(40, dtype=bool)
        menses[0] = True
        with pytest.raises(DegenerateLikelihoodError) as exc:
            run_filter(subject2, CycleDataset(bbt=bbt, menses=menses), grid)
        assert 1 <= exc.value.day <= 40


class TestSmooth:
    def test_requires_retained_mode(self, subject2):
        grid = PhaseGrid(32)
        trans = build_transition(subject2, grid)
        data = sample_grid_chain(subject2, grid, trans, 30, seed=6)
        fr = run_filter(subject2, data, grid, trans=trans)
        with pytest.raises(ValueError):
            smooth(fr, trans)

    def test_final_day_equals_filtering(self):
        n = 16
        params = grid_matched_params(n)
        grid = PhaseGrid(n)
        trans = build_transition(params, grid)
        data = sample_grid_chain(params, grid, trans, 25, seed=7)
        fr = run_filter(params, data, grid, keep_joints=True, trans=trans)
        joints = smooth(fr, trans)
        assert np.allclose(joints[-1].vals, fr.filtering[-1].vals, rtol=1e-12)

    def test_normalized_every_day(self):
        n = 16
        params = grid_matched_params(n)
        grid = PhaseGrid(n)
        trans = build_transition(params, grid)
        data = sample_grid_chain(params, grid, trans, 20, seed=8)
        fr = run_filter(params, data, grid, keep_joints=True, trans=trans)
        for joint in smooth(fr, trans):
            assert joint.vals.mean() == pytest.approx(1.0, abs=1e-9)
            assert np.all(joint.vals >= 0.0)

    @pytest.mark.parametrize("n,t_days", [(16, 30), (16, 20)])
    def test_dense_forward_backward_oracle(self, n, t_days):
        params = grid_matched_params(n)
        grid = PhaseGrid(n)
        trans = build_transition(params, grid)
        data = sample_grid_chain(params, grid, trans, t_days, seed=9)
        fr = run_filter(params, data, grid, keep_joints=True, trans=trans)
        joints = smooth(fr, trans)
        _, gammas = dense_forward_backward(params, data, grid, trans)
        ours_cur = smoothed_marginals(joints)
        oracle_cur = gammas.sum(axis=2) * n
        assert np.max(np.abs(ours_cur - oracle_cur)) < 1e-8
        ours_prev = np.stack([j.vals.mean(axis=0) for j in joints])
        oracle_prev = gammas.sum(axis=1) * n
        assert np.max(np.abs(ours_prev - oracle_prev)) < 1e-8
