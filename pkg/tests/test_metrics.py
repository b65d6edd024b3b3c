"""Tests for evaluation metrics and the regret-bound report."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nested_conformal.core import CoverageGrid, Trajectory
from nested_conformal.errors import InvalidInputError, UnsupportedMetricError
from nested_conformal.estimators import EstimatorConfig, run_estimator
from nested_conformal.metrics import (
    calibration_error,
    compute_run_metrics,
    cumulative_ce_sum,
    l1_tracking_error,
    nestedness_gaps,
    oracle_gap_path,
    regret_and_bounds,
    rolling_mean,
    set_size,
)
from nested_conformal.synthetic import WalkConfig, generate_walk, true_quantiles

GRID9 = CoverageGrid.from_range("0.1:0.9:0.1", 10.0)


def traj_from(q, scores, q_star=None):
    q = np.asarray(q, dtype=float)
    scores = np.asarray(scores, dtype=float)
    return Trajectory(scores, q, (scores[:, None] > q).astype(float), q_star)


def synthetic_run(method, T=3000, seed=0, sigma=0.025, **kwargs):
    walk = WalkConfig(T=T, seed=seed, sigma=sigma)
    stream = generate_walk(walk)
    q_star = true_quantiles(stream.z, walk, GRID9)
    cfg = EstimatorConfig(method, GRID9, **kwargs)
    traj, _ = run_estimator(cfg, stream.scores, q_star)
    return traj, cfg


class TestCalibration:
    def test_never_miscovers(self):
        traj = traj_from(np.ones((5, 1)), np.zeros(5))
        assert calibration_error(traj, CoverageGrid([0.1], 1.0))[0] == pytest.approx(0.1)

    def test_exact_rate(self):
        scores = np.zeros(10)
        scores[3] = 1.0
        traj = traj_from(np.full((10, 1), 0.5), scores)
        assert calibration_error(traj, CoverageGrid([0.1], 1.0))[0] == pytest.approx(0.0, abs=1e-15)

    def test_cumulative_sum(self):
        scores = np.array([1.0, 0.0, 0.0, 0.0])
        traj = traj_from(np.full((4, 2), 0.5), scores)
        grid = CoverageGrid([0.25, 0.5], 1.0)
        np.testing.assert_allclose(cumulative_ce_sum(traj, grid), [0.75 + 0.5, 0.25 + 0.0, 1 / 12 + 1 / 6, 0.0 + 0.25])

    @given(st.lists(st.booleans(), min_size=1, max_size=50), st.floats(0.01, 0.99))
    def test_range(self, errs, alpha):
        scores = np.array(errs, dtype=float)
        traj = traj_from(np.full((scores.size, 1), 0.5), scores)
        ce = calibration_error(traj, CoverageGrid([alpha], 1.0))[0]
        assert 0.0 <= ce <= max(alpha, 1 - alpha) + 1e-15


class TestRolling:
    def test_prefix_average_when_window_is_long(self):
        np.testing.assert_allclose(rolling_mean(np.array([1.0, 2.0, 3.0]), 10), [1.0, 1.5, 2.0])

    def test_trailing_window(self):
        np.testing.assert_allclose(rolling_mean(np.arange(6.0), 2), [0.0, 0.5, 1.5, 2.5, 3.5, 4.5])

    def test_rejects_zero_window(self):
        with pytest.raises(InvalidInputError):
            rolling_mean(np.ones(3), 0)

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=40), st.integers(1, 50))
    @settings(max_examples=200)
    def test_matches_direct_mean(self, values, window):
        x = np.array(values)
        expected = [x[max(0, k - window + 1): k + 1].mean() for k in range(x.size)]
        np.testing.assert_allclose(rolling_mean(x, window), expected, atol=1e-9)


class TestTracking:
    def test_zero_when_exact(self):
        q = np.tile([0.6, 0.4], (5, 1))
        traj = traj_from(q, np.zeros(5), q_star=q)
        np.testing.assert_array_equal(l1_tracking_error(traj, 3), 0.0)

    def test_constant_offset(self):
        q_star = np.tile([0.6, 0.4], (5, 1))
        q = q_star + np.array([0.0, 0.07])
        traj = traj_from(q, np.zeros(5), q_star=q_star)
        np.testing.assert_allclose(l1_tracking_error(traj, 2), 0.07)

    def test_needs_oracle(self):
        with pytest.raises(UnsupportedMetricError):
            l1_tracking_error(traj_from(np.ones((2, 1)), np.zeros(2)), 1)


class TestSetSize:
    def test_constant(self):
        traj = traj_from(np.full((4, 2), 0.5), np.zeros(4))
        np.testing.assert_allclose(set_size(traj, 2), 1.0)

    def test_zero(self):
        np.testing.assert_array_equal(set_size(traj_from(np.zeros((3, 1)), np.zeros(3)), 5), 0.0)

    def test_ordered_for_nested_thresholds(self):
        traj, _ = synthetic_run("pg", T=500)
        widths = set_size(traj, 100)
        assert np.all(np.diff(widths, axis=1) <= 1e-12)


class TestNestedness:
    def test_sorted_has_no_violations(self):
        min_gap, count = nestedness_gaps(traj_from([[0.6, 0.4], [0.5, 0.5]], [0.0, 0.0]))
        np.testing.assert_allclose(min_gap, [0.2, 0.0])
        assert count == 0

    def test_crossing_counted(self):
        _, count = nestedness_gaps(traj_from([[0.6, 0.4], [0.3, 0.5]], [0.0, 0.0]))
        assert count == 1

    def test_tolerance(self):
        _, count = nestedness_gaps(traj_from([[0.5, 0.5 + 1e-13]], [0.0]))
        assert count == 0

    def test_needs_two_levels(self):
        with pytest.raises(InvalidInputError):
            nestedness_gaps(traj_from(np.ones((2, 1)), np.zeros(2)))

    def test_eg_gaps_at_floor(self):
        traj, cfg = synthetic_run("eg", T=2000)
        min_gap, count = nestedness_gaps(traj)
        assert count == 0
        assert min_gap.min() >= GRID9.score_bound * cfg.mu - 1e-12

    def test_summary_consistency(self):
        traj, _ = synthetic_run("independent", T=3000, eta=0.5)
        m = compute_run_metrics(traj, GRID9, 1000)
        assert (m.violations == 0) == (m.min_gap.min() >= -1e-12)
        summary = m.summary()
        assert set(summary) >= {"ce_max", "ce_sum", "violations", "mean_width", "l1_final", "min_gap"}


class TestRegret:
    def test_oracle_gap_path(self):
        q_star = np.array([[0.6, 0.4]])
        np.testing.assert_allclose(oracle_gap_path(q_star, CoverageGrid([0.1, 0.2], 1.0)), [[0.4, 0.2, 0.4]])

    def test_zero_variation_reduces_to_static_bound(self):
        traj, cfg = synthetic_run("eg", T=2000, sigma=0.0)
        rep = regret_and_bounds(traj, cfg, density_floor=1.0)
        assert rep.path_w == 0.0 and rep.path_q == 0.0
        lead = 1 + math.log(1 / cfg.mu)
        T, BK = 2000, 10.0 * 9
        assert rep.quantile_bound == pytest.approx(lead / (cfg.eta * T) + BK**2 * cfg.eta / 2)
        assert rep.regret_bound == pytest.approx(lead / cfg.eta + cfg.eta * BK**2 * T)

    def test_pg_bound_formula(self):
        traj, cfg = synthetic_run("pg", T=2000)
        rep = regret_and_bounds(traj, cfg, density_floor=1.0)
        V = rep.path_q
        assert rep.regret_bound == pytest.approx(3 * 100 * 9 / cfg.eta * (1 + V) + cfg.eta * 9 * 2000)
        assert rep.quantile_bound == pytest.approx(3 * 100 * 9 * (1 + V) / (cfg.eta * 2000) + cfg.eta * 9)

    def test_deployed_equals_oracle(self):
        traj, cfg = synthetic_run("pg", T=500)
        exact = Trajectory(traj.scores, traj.q_star, (traj.scores[:, None] > traj.q_star), traj.q_star)
        rep = regret_and_bounds(exact, cfg, density_floor=1.0)
        assert rep.loss_regret <= 0.0 <= rep.regret_bound
        assert rep.quantile_error == 0.0

    @pytest.mark.parametrize("method", ["eg", "pg"])
    def test_default_run_passes(self, method):
        traj, cfg = synthetic_run(method, T=5000, seed=1)
        rep = regret_and_bounds(traj, cfg, density_floor=1.0, support_halfwidth=0.5)
        assert rep.regret_pass
        assert rep.comparator_feasible

    def test_other_methods_have_no_bound(self):
        traj, cfg = synthetic_run("independent", T=200)
        rep = regret_and_bounds(traj, cfg, density_floor=1.0)
        assert math.isnan(rep.regret_bound)

    def test_zero_step_bound_infinite(self):
        traj, cfg = synthetic_run("pg", T=200, eta=0.0)
        rep = regret_and_bounds(traj, cfg, density_floor=1.0)
        assert rep.regret_bound == math.inf and rep.regret_pass

    def test_needs_oracle(self):
        cfg = EstimatorConfig("eg", CoverageGrid([0.5], 1.0))
        with pytest.raises(UnsupportedMetricError):
            regret_and_bounds(traj_from(np.ones((2, 1)), np.zeros(2)), cfg, 1.0)

    @given(
        st.integers(0, 10_000),
        st.floats(1e-5, 1e-1),
        st.floats(0.01, 0.99),
    )
    @settings(max_examples=25, deadline=None)
    def test_eg_lemma_holds_for_any_valid_step_and_floor(self, seed, eta, mu_frac):
        mu = mu_frac * 0.01
        traj, cfg = synthetic_run("eg", T=1500, seed=seed, eta=eta, mu=mu)
        rep = regret_and_bounds(traj, cfg, density_floor=1.0)
        assert rep.comparator_feasible
        assert rep.loss_regret <= rep.regret_bound

    @given(st.integers(0, 10_000), st.floats(1e-4, 5.0))
    @settings(max_examples=25, deadline=None)
    def test_pg_lemma_holds_for_any_step(self, seed, eta):
        traj, cfg = synthetic_run("pg", T=1500, seed=seed, eta=eta)
        rep = regret_and_bounds(traj, cfg, density_floor=1.0)
        assert rep.loss_regret <= rep.regret_bound
