"""
Tests for portfolio construction, the synthetic asset fixture and the portfolio study
"""

import numpy as np
import pandas as pd
import pytest

from models.sieve_net import TrainConfig
from risk.caviar import CaviarSpec
from risk.portfolio import (
    AssetFixture, equal_weights, portfolio_caviar_spec, portfolio_returns, random_portfolios,
    random_weights, run_portfolio_study, synthetic_asset_returns,
)
from utils.errors import ConfigError
from utils.numerics import RngStream


def _fixture():
    return AssetFixture(["a", "b", "c"], np.array([0.0, 0.01, -0.01]),
                        np.array([[1.0, 0.3, 0.0], [0.3, 0.5, 0.1], [0.0, 0.1, 2.0]]))


class TestWeights:

    def test_random_weights_lie_on_the_simplex(self):
        W = random_weights(6, 200, RngStream(0))
        assert W.shape == (200, 6)
        assert W.min() >= 0.0
        np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)

    def test_single_asset(self):
        assert random_weights(1, 1, RngStream(0))[0, 0] == pytest.approx(1.0)

    def test_equal_weights(self):
        np.testing.assert_allclose(equal_weights(6), 1.0 / 6.0)

    def test_invalid_sizes(self):
        with pytest.raises(ValueError):
            random_weights(0, 3, RngStream(0))
        with pytest.raises(ValueError):
            equal_weights(0)


class TestPortfolioReturns:

    def test_single_asset_at_full_weight(self, rng):
        r = rng.normal(size=50)
        np.testing.assert_allclose(portfolio_returns(r[:, None], [1.0]), r, rtol=1e-12, atol=1e-12)

    def test_identical_assets(self, rng):
        r = rng.normal(size=50)
        np.testing.assert_allclose(portfolio_returns(np.column_stack([r, r]), [0.3, 0.7]), r,
                                   rtol=1e-12, atol=1e-12)

    def test_weight_count_mismatch(self, rng):
        with pytest.raises(ValueError):
            portfolio_returns(rng.normal(size=(10, 3)), [0.5, 0.5])

    def test_random_portfolio_frames(self, rng):
        assets = pd.DataFrame(rng.normal(size=(30, 3)), columns=["a", "b", "c"])
        weights, series = random_portfolios(assets, 4, RngStream(1))
        assert list(weights.columns) == ["a", "b", "c"]
        assert list(series.columns) == list(weights.index)
        assert series.shape == (30, 4)


class TestFixture:

    def test_shape_mismatch(self):
        with pytest.raises(ConfigError):
            AssetFixture(["a", "b"], np.zeros(3), np.eye(2))

    def test_asymmetric_covariance(self):
        with pytest.raises(ConfigError):
            AssetFixture(["a", "b"], np.zeros(2), np.array([[1.0, 0.2], [0.0, 1.0]]))

    def test_from_dict_needs_every_key(self):
        with pytest.raises(ConfigError):
            AssetFixture.from_dict({"assets": ["a"], "means": [0.0]})

    def test_synthetic_returns_layout(self):
        frame = synthetic_asset_returns(250, RngStream(3), _fixture())
        assert list(frame.columns) == ["a", "b", "c"]
        assert frame.shape == (250, 3)
        assert isinstance(frame.index, pd.DatetimeIndex)
        assert np.all(np.isfinite(frame.to_numpy()))

    def test_synthetic_returns_match_the_covariance(self):
        frame = synthetic_asset_returns(20_000, RngStream(5), _fixture())
        np.testing.assert_allclose(np.cov(frame.to_numpy(), rowvar=False), _fixture().covariance,
                                   rtol=0.25, atol=0.1)

    def test_synthetic_returns_are_deterministic(self):
        a = synthetic_asset_returns(100, RngStream(8), _fixture())
        b = synthetic_asset_returns(100, RngStream(8), _fixture())
        pd.testing.assert_frame_equal(a, b)


class TestStudy:

    @pytest.fixture
    def assets(self):
        return synthetic_asset_returns(800, RngStream(2), _fixture())

    def test_rows_and_summary(self, assets):
        study = run_portfolio_study(assets, 3, 0.05, 300, models=["constant", "garch"], seed=1)
        assert len(study.rows) == 6
        assert (study.rows.loc[study.rows["model"] == "constant", "status"] == "ok").all()
        assert study.weights.shape == (3, 3)
        assert study.summary["constant"]["n_ok"] == 3
        assert set(study.summary["garch"]) >= {"n_ok", "mean_exceedances", "failures_rejection_rate"}

    def test_deterministic(self, assets):
        a = run_portfolio_study(assets, 2, 0.05, 300, models=["constant"], seed=4)
        b = run_portfolio_study(assets, 2, 0.05, 300, models=["constant"], seed=4)
        pd.testing.assert_frame_equal(a.rows, b.rows)

    def test_unknown_model(self, assets):
        with pytest.raises(ConfigError):
            run_portfolio_study(assets, 2, 0.05, 300, models=["ewma"])

    def test_holdout_too_long(self, assets):
        with pytest.raises(ConfigError):
            run_portfolio_study(assets, 2, 0.05, 800, models=["constant"])

    def test_default_caviar_network_has_two_layers(self):
        spec = portfolio_caviar_spec(0.05)
        assert spec.hidden_sizes == (80, 5)
        assert spec.alpha == 0.05

    def test_caviar_network_keeps_the_training_options(self):
        base = CaviarSpec(alpha=0.01, train=TrainConfig(max_epochs=7))
        spec = portfolio_caviar_spec(0.01, base, (10, 3))
        assert spec.hidden_sizes == (10, 3)
        assert spec.train.max_epochs == 7

    def test_caviar_inputs_are_the_constituents(self, assets):
        quick = CaviarSpec(alpha=0.05, hidden_sizes=(5,),
                           train=TrainConfig(max_epochs=50, learning_rate=0.05, patience=20))
        study = run_portfolio_study(assets, 1, 0.05, 300, models=["sann-caviar"], seed=1, caviar=quick)
        row = study.rows.iloc[0]
        assert row["status"] == "ok"
        # lagged squared returns of each of the three assets
        assert row["n_inputs"] == assets.shape[1] * quick.lags
