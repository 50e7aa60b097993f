"""
Tests for the quantile models: GARCH, CAViaR variants and the forecast layer
"""

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from models.sieve_net import SieveNetArch, SieveNetParams, TrainConfig
from risk.backtest import failures_test, integrated_var_change
from risk.caviar import (
    CaviarSpec, ConstantQuantileModel, SavCaviar, caviar_path, fit_caviar, hall_sheather_bandwidth,
    quantile_recursion, squared_lags,
)
from risk.forecast import VarForecastSeries, fit_var_model, forecast_var, in_sample_var
from risk.garch import fit_garch11, garch_returns_frame, simulate_garch11
from utils.errors import ConfigError, DegenerateDataError
from utils.numerics import RngStream, sample_quantile

QUICK_CAVIAR = CaviarSpec(alpha=0.05, hidden_sizes=(5,),
                          train=TrainConfig(max_epochs=200, learning_rate=0.05, patience=50))


def _constant_network(c: float) -> SieveNetParams:
    arch = SieveNetArch.from_dims(1, (1,))
    return SieveNetParams.from_weights(arch, [np.zeros((1, 2))], np.array([c, 0.0]))


@pytest.fixture(scope="module")
def garch_series():
    return garch_returns_frame(0.05, 0.05, 0.90, 1500, seed=4)


class TestRecursion:

    def test_squared_lags_layout(self):
        X = squared_lags(np.array([1.0, 2.0, 3.0, 4.0]), 2)
        np.testing.assert_array_equal(X, [[4.0, 1.0], [9.0, 4.0]])

    def test_squared_lags_needs_enough_rows(self):
        with pytest.raises(ValueError):
            squared_lags(np.array([1.0, 2.0]), 2)

    def test_constant_network_without_feedback(self):
        path = caviar_path(_constant_network(-1.5), 0.0, -2.0, np.ones(10), 1)
        assert path[0] == -2.0
        np.testing.assert_allclose(path[1:], -1.5)

    def test_geometric_decay(self):
        path = caviar_path(_constant_network(0.0), 0.5, -3.0, np.ones(8), 1)
        np.testing.assert_allclose(path, -3.0 * 0.5 ** np.arange(8), rtol=1e-12)

    def test_recursion_matches_a_loop(self, rng):
        phi = rng.normal(size=20)
        expected, prev = [], 0.7
        for value in phi:
            prev = 0.3 * prev + value
            expected.append(prev)
        np.testing.assert_allclose(quantile_recursion(phi, 0.3, 0.7), expected, rtol=1e-12)


class TestGarch:

    def test_constant_returns(self):
        with pytest.raises(DegenerateDataError):
            fit_garch11(np.full(500, 0.1))

    def test_short_series(self, rng):
        with pytest.raises(ValueError):
            fit_garch11(rng.normal(size=100))

    def test_iid_returns_have_little_arch(self):
        returns = np.random.default_rng(9).normal(size=3000)
        assert fit_garch11(returns).alpha <= 0.03

    def test_recovers_persistence(self):
        frame = garch_returns_frame(0.05, 0.05, 0.90, 5000, seed=1)
        fit = fit_garch11(frame["returns"].to_numpy())
        assert fit.persistence == pytest.approx(0.95, abs=0.05)

    def test_true_model_is_rejected_at_the_nominal_rate(self):
        rejections = 0
        for seed in range(200):
            r, sigma = simulate_garch11(0.05, 0.05, 0.90, 1000, RngStream(seed))
            hits = r < stats.norm.ppf(0.05) * sigma
            rejections += failures_test(hits, 0.05).p_value < 0.05
        assert 0.02 <= rejections / 200 <= 0.10

    def test_student_t_innovations(self):
        r, sigma = simulate_garch11(1.0, 0.0, 0.0, 20_000, RngStream(6), innovation_df=5.0)
        np.testing.assert_array_equal(sigma, 1.0)
        assert np.var(r) == pytest.approx(1.0, rel=0.1)
        assert stats.kurtosis(r) > 1.0
        with pytest.raises(ValueError):
            simulate_garch11(1.0, 0.0, 0.0, 10, RngStream(6), innovation_df=2.0)

    def test_tracks_the_true_volatility(self, garch_series):
        fit = fit_garch11(garch_series["returns"].to_numpy())
        sigma = fit.conditional_sigma(garch_series["returns"].to_numpy())
        assert np.corrcoef(sigma, garch_series["true_sigma"])[0, 1] >= 0.95
        assert np.all(fit.var_path(garch_series["returns"].to_numpy(), 0.01) < fit.mu)


class TestBenchmarks:

    def test_constant_model_is_flat(self, garch_series):
        model = ConstantQuantileModel(0.05).fit(garch_series["returns"])
        path = model.var_path(np.zeros(7))
        np.testing.assert_array_equal(path, model.quantile)

    def test_constant_quantile_grows_with_alpha(self, garch_series):
        low = ConstantQuantileModel(0.01).fit(garch_series["returns"]).quantile
        high = ConstantQuantileModel(0.05).fit(garch_series["returns"]).quantile
        assert low < high < 0.0

    def test_constant_model_before_fit(self):
        with pytest.raises(RuntimeError):
            ConstantQuantileModel(0.05).var_path(np.zeros(3))

    def test_constant_model_rejects_another_alpha(self, garch_series):
        model = ConstantQuantileModel(0.05).fit(garch_series["returns"])
        np.testing.assert_array_equal(model.var_path(np.zeros(3), 0.05), model.quantile)
        with pytest.raises(ValueError):
            model.var_path(np.zeros(3), 0.01)

    def test_sav_caviar_is_deterministic(self, garch_series):
        r = garch_series["returns"].to_numpy()[:600]
        a = SavCaviar(0.05).fit(r, RngStream(2))
        b = SavCaviar(0.05).fit(r, RngStream(2))
        np.testing.assert_array_equal(a.coef, b.coef)
        path = a.var_path(r)
        assert path.shape == r.shape
        assert np.all(np.isfinite(path))

    def test_hall_sheather_shrinks_with_n(self):
        assert 0.0 < hall_sheather_bandwidth(10_000, 0.05) < hall_sheather_bandwidth(500, 0.05)


class TestSannCaviar:

    def test_spec_forces_the_pinball_loss(self):
        spec = CaviarSpec(alpha=0.05)
        assert spec.train.loss == "pinball"
        assert spec.train.alpha == 0.05

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            CaviarSpec(p=2)
        with pytest.raises(ValueError):
            CaviarSpec(alpha=0.7)

    def test_from_dict_merges_training_options(self):
        spec = CaviarSpec.from_dict({"alpha": 0.05, "train": {"max_epochs": 10}})
        assert spec.train.max_epochs == 10
        assert spec.train.patience == 100

    def test_short_series(self, rng):
        with pytest.raises(ValueError):
            fit_caviar(QUICK_CAVIAR, rng.normal(size=200))

    def test_constant_returns(self):
        with pytest.raises(DegenerateDataError):
            fit_caviar(QUICK_CAVIAR, np.zeros(400))

    def test_quick_fit(self, garch_series):
        r = garch_series["returns"].to_numpy()
        fit = fit_caviar(QUICK_CAVIAR, r[:1000])
        assert -0.999 <= fit.beta <= 0.999
        assert fit.in_sample.shape == (1000,)
        path = fit.var_path(r)
        assert path.shape == r.shape
        assert np.all(np.isfinite(path))
        assert np.mean(path) < 0.0
        assert set(fit.report()) >= {"beta", "beta_se", "q0", "epochs_run"}

    def test_deterministic_given_seed(self, garch_series):
        r = garch_series["returns"].to_numpy()[:500]
        np.testing.assert_array_equal(fit_caviar(QUICK_CAVIAR, r).in_sample,
                                      fit_caviar(QUICK_CAVIAR, r).in_sample)

    def test_feature_mismatch(self, garch_series):
        r = garch_series["returns"].to_numpy()[:500]
        fit = fit_caviar(QUICK_CAVIAR, r)
        with pytest.raises(ValueError):
            fit.var_path(r, features=np.ones((500, 2)))

    def test_forecast_alpha_must_match_the_fit(self, garch_series):
        r = garch_series["returns"].to_numpy()[:500]
        fit = fit_caviar(QUICK_CAVIAR, r)
        np.testing.assert_array_equal(fit.var_path(r, 0.05), fit.var_path(r))
        with pytest.raises(ValueError):
            fit.var_path(r, 0.01)

    def test_report_counts_the_network_inputs(self, garch_series):
        fit = fit_caviar(QUICK_CAVIAR, garch_series["returns"].to_numpy()[:500])
        assert fit.report()["n_inputs"] == QUICK_CAVIAR.lags

    @pytest.mark.slow
    def test_out_of_sample_coverage(self):
        frame = garch_returns_frame(0.05, 0.05, 0.90, 3000, seed=5)
        r = frame["returns"].to_numpy()
        model = fit_var_model("sann-caviar", r[:2000], 0.05, CaviarSpec(alpha=0.05))
        forecast = forecast_var(model, r, 1000, 0.05)
        exceedances = int(np.sum(r[-1000:] < forecast.values))
        low, high = stats.binom.interval(0.99, 1000, 0.05)
        assert low <= exceedances <= high


class TestForecast:

    def test_unknown_model(self, garch_series):
        with pytest.raises(ConfigError):
            fit_var_model("ewma", garch_series["returns"], 0.05)

    def test_caviar_alpha_must_match(self, garch_series):
        with pytest.raises(ConfigError):
            fit_var_model("sann-caviar", garch_series["returns"], 0.01, QUICK_CAVIAR)

    def test_holdout_out_of_range(self, garch_series):
        model = fit_var_model("constant", garch_series["returns"], 0.05)
        with pytest.raises(ValueError):
            forecast_var(model, garch_series["returns"], len(garch_series) + 1, 0.05)

    def test_only_one_step_ahead(self, garch_series):
        model = fit_var_model("constant", garch_series["returns"], 0.05)
        with pytest.raises(ValueError):
            forecast_var(model, garch_series["returns"], 10, 0.05, horizon=2)

    def test_garch_forecast_keeps_the_dates(self, garch_series):
        returns = garch_series["returns"]
        model = fit_var_model("garch", returns.iloc[:1000], 0.05)
        forecast = forecast_var(model, returns, 500, 0.05)
        assert isinstance(forecast, VarForecastSeries)
        assert forecast.values.shape == (500,)
        assert forecast.index[0] == returns.index[1000]

    def test_frame_for_plotting(self, garch_series):
        returns = garch_series["returns"]
        model = fit_var_model("constant", returns.iloc[:1000], 0.05)
        frame = forecast_var(model, returns, 500, 0.05).to_frame(returns.iloc[-500:])
        assert list(frame.columns) == ["date", "return", "var", "exceed"]
        assert frame["exceed"].isin([0, 1]).all()
        assert frame["date"].iloc[0] == str(returns.index[1000])

    def test_in_sample_path(self, garch_series):
        returns = garch_series["returns"].iloc[:400]
        model = fit_var_model("constant", returns, 0.05)
        series = in_sample_var(model, returns, 0.05)
        assert series.in_sample
        assert isinstance(series.index, pd.DatetimeIndex)

    @pytest.mark.slow
    def test_normal_garch_is_least_conservative_under_fat_tails(self):
        frame = garch_returns_frame(0.05, 0.05, 0.90, 6000, seed=8, innovation_df=5.0)
        returns = frame["returns"]
        train = returns.iloc[:5000]
        q_uncond = sample_quantile(train.to_numpy(), 0.01)
        change = {}
        for tag in ("garch", "sav-caviar", "constant"):
            model = fit_var_model(tag, train, 0.01, seed=3)
            change[tag] = integrated_var_change(forecast_var(model, returns, 1000, 0.01).values, q_uncond)
        assert change["constant"] == pytest.approx(0.0)
        assert change["garch"] < change["sav-caviar"]
        assert change["garch"] < change["constant"]
