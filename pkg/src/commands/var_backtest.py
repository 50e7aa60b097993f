"""
VaR Backtest - Fit VaR models on the training window and backtest the holdout
"""

import argparse
import logging
from typing import Dict, List

import pandas as pd

from risk.backtest import backtest
from risk.caviar import CaviarSpec
from risk.forecast import VAR_MODELS, fit_var_model, forecast_var
from risk.portfolio import (
    PORTFOLIO_HIDDEN_SIZES, AssetFixture, equal_weights, portfolio_caviar_spec, portfolio_returns,
    run_portfolio_study, synthetic_asset_returns,
)
from utils.config_manager import ConfigManager
from utils.errors import ConfigError
from utils.frame_io import ingest_prices
from utils.numerics import RngStream, sample_quantile
from utils.report_writer import ReportWriter

logger = logging.getLogger(__name__)

NAME = "var-backtest"
HELP = "Backtest one-step-ahead VaR forecasts (SANN-CAViaR and benchmarks)"

FLAG_KEYS = {
    "data": "data",
    "date_column": "date_column",
    "price_columns": "price_columns",
    "returns_column": "returns_column",
    "model": "model",
    "alpha": "alpha",
    "holdout": "holdout",
    "portfolios": "portfolios",
    "n_jobs": "n_jobs",
}


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", help="Price CSV (default: the synthetic asset fixture)")
    parser.add_argument("--date-column", dest="date_column")
    parser.add_argument("--price-columns", dest="price_columns", nargs="+")
    parser.add_argument("--returns-column", dest="returns_column",
                        help="Backtest one column instead of the equal-weight portfolio")
    parser.add_argument("--model", choices=VAR_MODELS)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--holdout", type=int, help="Out-of-sample periods")
    parser.add_argument("--portfolios", type=int, help="Also run the random-portfolio study with N portfolios")
    parser.add_argument("--n-jobs", dest="n_jobs", type=int, help="joblib workers")


def load_asset_returns(config: Dict) -> pd.DataFrame:
    if config.get("data"):
        return ingest_prices(config["data"], config.get("date_column") or "date",
                             config.get("price_columns"))
    fixture = AssetFixture.from_dict(ConfigManager().get_fixture(config.get("fixture") or "six_assets"))
    return synthetic_asset_returns(int(config["n_obs"]), RngStream(int(config["seed"])), fixture)


def target_series(assets: pd.DataFrame, column) -> pd.Series:
    """One asset column, or the equal-weight portfolio of all columns"""
    if column:
        if column not in assets.columns:
            raise ConfigError(f"Returns column '{column}' not in {list(assets.columns)}")
        return assets[column]
    if assets.shape[1] == 1:
        return assets.iloc[:, 0]
    values = portfolio_returns(assets.to_numpy(), equal_weights(assets.shape[1]))
    return pd.Series(values, index=assets.index, name="equal_weight")


def _model_list(config: Dict) -> List[str]:
    models = [config["model"]] + [m for m in config.get("benchmarks") or [] if m != config["model"]]
    unknown = [m for m in models if m not in VAR_MODELS]
    if unknown:
        raise ConfigError(f"Unknown VaR models {unknown}, expected some of {VAR_MODELS}")
    return models


def run(config: Dict, writer: ReportWriter) -> Dict:
    alpha = float(config["alpha"])
    holdout = int(config["holdout"])
    models = _model_list(config)
    caviar = CaviarSpec.from_dict({**(config.get("caviar") or {}), "alpha": alpha})

    assets = load_asset_returns(config)
    series = target_series(assets, config.get("returns_column"))
    if not 1 <= holdout < len(series):
        raise ConfigError(f"holdout must lie in [1, {len(series) - 1}], got {holdout}")
    r = series.to_numpy(dtype=float)
    train = r[:-holdout]
    q_uncond = sample_quantile(train, alpha)
    logger.info(f"VaR backtest on '{series.name}': {len(train)} training and {holdout} test returns")

    reports, fits, rows = {}, {}, []
    for tag in models:
        model = fit_var_model(tag, train, alpha, caviar, int(config["seed"]))
        forecast = forecast_var(model, series, holdout, alpha)
        caviar_fit = tag == "sann-caviar"
        report = backtest(tag, r[-holdout:], forecast.values, alpha, q_uncond,
                          model.beta if caviar_fit else None,
                          model.beta_se if caviar_fit else None)
        reports[tag] = report.to_dict()
        fits[tag] = model.report()
        rows.append(report.to_dict())
        writer.csv(f"var_path_{tag}.csv", forecast.to_frame(r[-holdout:]))
    writer.csv("backtest.csv", pd.DataFrame(rows))

    summary = {"series": str(series.name), "q_uncond": q_uncond, "reports": reports, "models": fits}
    portfolios = int(config.get("portfolios") or 0)
    if portfolios > 0:
        if assets.shape[1] < 2:
            raise ConfigError("The portfolio study needs at least two asset columns")
        hidden = config.get("portfolio_hidden_sizes") or PORTFOLIO_HIDDEN_SIZES
        study = run_portfolio_study(assets, portfolios, alpha, holdout,
                                    config.get("portfolio_models") or VAR_MODELS,
                                    int(config["seed"]), portfolio_caviar_spec(alpha, caviar, hidden),
                                    int(config.get("n_jobs", 1)))
        writer.csv("portfolio_weights.csv", study.weights.reset_index(names="portfolio"))
        writer.csv("portfolio_backtests.csv", study.rows)
        summary["portfolio_study"] = study.summary

    writer.json("report.json", {"config": config, **summary,
                                "artifacts": writer.artifacts() + ["report.json"]})
    return summary
