"""
Tests for the SANN partially linear model and its linear and kernel benchmarks
"""

import numpy as np
import pandas as pd
import pytest

from models.kernel import KernelSpec
from models.plm import (
    PlmSpec, beta_std_errors, fit_kernel_plm, fit_linear, fit_report, fit_sann, hc0_std_errors,
    partial_out, predict, prune_features, two_step_beta,
)
from models.sieve_net import TrainConfig, hidden_features
from utils.errors import SingularSystemError
from utils.numerics import ols_solve

FAST_TRAIN = TrainConfig(max_epochs=300, l1_penalty=0.001)


def _joint_beta(X, y, G):
    return ols_solve(np.hstack([X, G]), y)[:X.shape[1]]


class TestPartialling:

    def test_two_step_equals_joint_ols(self):
        gen = np.random.default_rng(0)
        for _ in range(100):
            n = int(gen.integers(20, 60))
            X = gen.normal(size=(n, 2))
            G = np.column_stack([np.ones(n), gen.normal(size=(n, 5))])
            y = gen.normal(size=n)
            np.testing.assert_allclose(two_step_beta(X, y, G), _joint_beta(X, y, G), rtol=1e-8, atol=1e-10)

    def test_fixed_small_instance(self):
        gen = np.random.default_rng(11)
        X = gen.normal(size=(30, 2))
        G = gen.normal(size=(30, 5))
        y = X @ [1.0, -2.0] + G @ gen.normal(size=5) + gen.normal(size=30)
        np.testing.assert_allclose(two_step_beta(X, y, G), _joint_beta(X, y, G), rtol=1e-8)

    def test_partialled_columns_are_orthogonal_to_features(self, rng):
        G = rng.normal(size=(40, 3))
        M = partial_out(rng.normal(size=(40, 2)), G)
        assert np.max(np.abs(G.T @ M)) < 1e-10

    def test_residual_maker_is_idempotent(self, rng):
        G = np.column_stack([np.ones(50), rng.normal(size=(50, 4))])
        once = partial_out(rng.normal(size=(50, 3)), G)
        np.testing.assert_allclose(partial_out(once, G), once, atol=1e-10)

    def test_shifting_y_leaves_beta_unchanged(self, rng):
        X = rng.normal(size=(60, 2))
        G = np.column_stack([np.ones(60), rng.normal(size=(60, 3))])
        y = X @ [1.5, -0.5] + rng.normal(size=60)
        np.testing.assert_allclose(two_step_beta(X, y + 7.0, G), two_step_beta(X, y, G), rtol=1e-8, atol=1e-10)

    def test_zero_residuals_give_zero_errors(self, rng):
        np.testing.assert_array_equal(hc0_std_errors(rng.normal(size=(10, 2)), np.zeros(10)), 0.0)


class TestPruning:

    def test_drops_zero_and_duplicate_columns(self, rng):
        a, b = rng.normal(size=20), rng.normal(size=20)
        G = np.column_stack([np.ones(20), a, np.zeros(20), b, 3.0 * a])
        report = prune_features(G)
        assert report.zero == [2]
        assert report.collinear == [4]
        assert report.kept == [0, 1, 3]
        assert report.pruned == [2, 4]

    def test_feature_collinear_with_protected_column_is_dropped(self, rng):
        x = rng.normal(size=20)
        G = np.column_stack([np.ones(20), 2.0 * x, rng.normal(size=20)])
        report = prune_features(G, protected=x)
        assert report.collinear == [1]

    def test_collinear_linear_regressors_raise(self, rng):
        x = rng.normal(size=20)
        with pytest.raises(SingularSystemError):
            prune_features(np.ones((20, 1)), protected=np.column_stack([x, -x]))

    def test_kept_design_has_full_rank(self, rng):
        X = rng.normal(size=(30, 2))
        a = rng.normal(size=30)
        G = np.column_stack([np.ones(30), a, X[:, 0] - a, X[:, 1], np.zeros(30), rng.normal(size=30)])
        report = prune_features(G, protected=X)
        assert report.zero == [4]
        assert report.collinear == [2, 3]
        design = np.hstack([X, G[:, report.kept]])
        assert np.linalg.matrix_rank(design) == design.shape[1]


class TestSpec:

    def test_needs_both_parts(self):
        with pytest.raises(ValueError):
            PlmSpec((), ("z",))
        with pytest.raises(ValueError):
            PlmSpec(("x",), ())

    def test_target_cannot_be_a_regressor(self):
        with pytest.raises(ValueError):
            PlmSpec(("y",), ("z",))

    def test_overlap_is_reported(self):
        assert PlmSpec(("a", "b"), ("b", "c")).overlap == ["b"]


class TestSann:

    @pytest.fixture
    def fit(self, plm_frame):
        spec = PlmSpec(("x1", "x2"), ("z",), hidden_sizes=(10,), train=FAST_TRAIN)
        return fit_sann(spec, plm_frame)

    def test_beta_equals_joint_regression_on_kept_features(self, fit, plm_frame):
        X = plm_frame[["x1", "x2"]].to_numpy()
        G = hidden_features(fit.sieve, plm_frame[["z"]].to_numpy())[:, fit.kept_features]
        np.testing.assert_allclose(fit.beta_hat, _joint_beta(X, plm_frame["y"].to_numpy(), G),
                                   rtol=1e-8, atol=1e-10)

    def test_recovers_linear_coefficients(self, fit):
        np.testing.assert_allclose(fit.beta_hat, [2.0, -1.0], atol=0.15)
        assert np.all(fit.std_errors > 0)

    def test_standard_errors_recompute_on_the_training_frame(self, fit, plm_frame):
        np.testing.assert_allclose(beta_std_errors(fit, plm_frame), fit.std_errors, rtol=1e-8)

    def test_shifting_y_moves_only_the_bias(self, fit, plm_frame):
        X = plm_frame[["x1", "x2"]].to_numpy()
        y = plm_frame["y"].to_numpy()
        G = hidden_features(fit.sieve, plm_frame[["z"]].to_numpy())[:, fit.kept_features]
        beta = two_step_beta(X, y + 4.0, G)
        np.testing.assert_allclose(beta, fit.beta_hat, rtol=1e-8, atol=1e-10)
        shifted = G @ ols_solve(G, y + 4.0 - X @ beta)
        np.testing.assert_allclose(shifted - G @ fit.sieve.output_weights[fit.kept_features], 4.0, atol=1e-8)

    def test_pruned_units_do_not_change_predictions(self, fit, plm_frame):
        G = hidden_features(fit.sieve, plm_frame[["z"]].to_numpy())
        w = fit.sieve.output_weights
        np.testing.assert_array_equal(w[fit.pruned_columns], 0.0)
        np.testing.assert_allclose(G @ w, G[:, fit.kept_features] @ w[fit.kept_features], atol=1e-10)

    def test_predict_on_training_data_is_fitted_values(self, fit, plm_frame):
        np.testing.assert_array_equal(predict(fit, plm_frame), fit.fitted_values)

    def test_zero_linear_row_gives_the_nonparametric_part(self, fit, plm_frame):
        row = plm_frame.iloc[:5].assign(x1=0.0, x2=0.0)
        G = hidden_features(fit.sieve, row[["z"]].to_numpy())
        np.testing.assert_allclose(predict(fit, row), G @ fit.sieve.output_weights, rtol=1e-12)

    def test_missing_column(self, fit, plm_frame):
        with pytest.raises(KeyError):
            predict(fit, plm_frame.drop(columns=["x2"]))

    def test_report(self, fit):
        report = fit_report(fit, include_params=True)
        assert report["linear_columns"] == ["x1", "x2"]
        assert len(report["beta_hat"]) == 2
        assert "sieve_params" in report
        assert report["overlap_warning"] is False

    def test_overlap_still_fits(self, plm_frame):
        spec = PlmSpec(("x1", "z"), ("z", "x2"), hidden_sizes=(5,), train=FAST_TRAIN)
        fit = fit_sann(spec, plm_frame)
        assert fit.overlap_warning
        assert np.all(np.isfinite(fit.beta_hat))

    @pytest.mark.slow
    def test_null_nonparametric_part(self):
        estimates = []
        for b in range(10):
            gen = np.random.default_rng(b)
            n = 300
            frame = pd.DataFrame({"x1": gen.normal(size=n), "z": gen.uniform(-1, 1, n)})
            frame["y"] = 2.0 * frame["x1"] + gen.normal(scale=0.5, size=n)
            spec = PlmSpec(("x1",), ("z",), hidden_sizes=(10,), train=FAST_TRAIN)
            estimates.append(fit_sann(spec, frame).beta_hat[0])
        assert abs(np.mean(estimates) - 2.0) < 0.05


class TestLinear:

    def test_coefficients_include_constant(self, plm_frame):
        fit = fit_linear(plm_frame, ["x1", "x2"])
        assert list(fit.coefficients()) == ["const", "x1", "x2"]
        np.testing.assert_allclose(fit.predict(plm_frame), fit.fitted_values)

    def test_robust_errors_match_classical_under_homoskedasticity(self):
        gen = np.random.default_rng(0)
        n = 10_000
        frame = pd.DataFrame({"x": gen.normal(size=n)})
        frame["y"] = 1.0 + 0.5 * frame["x"] + gen.normal(size=n)
        fit = fit_linear(frame, ["x"])
        np.testing.assert_allclose(fit.robust_std_errors, fit.std_errors, rtol=0.15)


class TestKernelPlm:

    def test_recovers_linear_coefficients(self, plm_frame):
        fit = fit_kernel_plm(plm_frame, ["x1", "x2"], ["z"])
        np.testing.assert_allclose(fit.beta_hat, [2.0, -1.0], atol=0.15)
        assert fit.bandwidths.shape == (1,)

    def test_fixed_bandwidth(self, plm_frame):
        fit = fit_kernel_plm(plm_frame, ["x1"], ["z"], kernel_spec=KernelSpec(bandwidths=(0.5,)))
        assert fit.bandwidths.tolist() == [0.5]
        assert np.all(np.isfinite(fit.predict(plm_frame.iloc[:10])))
