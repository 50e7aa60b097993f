"""
Desk-scale simulation studies run from the repository presets

These take minutes; deselect with -m "not slow".
"""

import numpy as np
import pytest
from scipy import stats

from simulation.dgp import DgpSpec
from simulation.estimators import EstimatorSpec
from simulation.monte_carlo import decompose_mse, run_mc
from utils.config_manager import ConfigManager

pytestmark = pytest.mark.slow


def _preset(name, cell=None):
    return ConfigManager().get_preset(name, cell)


@pytest.mark.parametrize("cell, winner, loser", [("2x1", "kernel", "ann"), ("15x10", "ann", "kernel")])
def test_high_dimensional_ordering(cell, winner, loser):
    preset = _preset("high_dim", cell)
    result = run_mc(DgpSpec.from_dict(preset["dgp"]), ["ann", "kernel"], preset["B"], split=preset["split"])
    assert result.mean_metric(winner) < result.mean_metric(loser)


@pytest.fixture(scope="module")
def model2_study():
    preset = _preset("plm_study", "model2")
    return run_mc(DgpSpec.from_dict(preset["dgp"]), preset["estimators"], preset["B"],
                  holdout=preset["holdout"])


def test_model2_prediction_ordering(model2_study):
    rmspe = {tag: model2_study.mean_metric(tag) for tag in ("truth", "sann", "linear", "ann")}
    assert rmspe["truth"] < rmspe["sann"] < rmspe["linear"] < rmspe["ann"]
    assert rmspe["sann"] <= 1.15 * rmspe["linear"]


def test_model2_linear_coefficients(model2_study):
    sann = model2_study.ok("sann")
    linear = model2_study.ok("linear")
    assert sann["beta_v_lag1"].mean() == pytest.approx(0.47, abs=0.03)
    assert sann["beta_v_lag2"].mean() == pytest.approx(-0.45, abs=0.03)
    assert sann["se_v_lag1"].mean() <= linear["se_v_lag1"].mean()


def test_noiseless_chaos_sweep():
    preset = _preset("chaos_sweep")
    result = decompose_mse(DgpSpec.from_dict(preset["dgp"]), preset["orders"], preset["B"],
                           base=EstimatorSpec.from_config(preset["base"]), split=preset["split"])
    mse = result.integrated["integrated_mse"].to_numpy()
    assert np.sum(np.diff(mse) > 0) <= 1
    assert mse[-1] <= 0.5


def test_irregular_bias_falls_with_the_sieve_order():
    preset = _preset("irregular_sweep")
    result = decompose_mse(DgpSpec.from_dict(preset["dgp"]), preset["orders"], preset["B"],
                           base=EstimatorSpec.from_config(preset["base"]), split=preset["split"])
    bias2 = result.integrated["integrated_bias2"].to_numpy()
    assert len(bias2) == len(preset["orders"])
    assert stats.spearmanr(result.integrated["order"], bias2)[0] <= 0.0
    assert bias2[-1] < bias2[0]
