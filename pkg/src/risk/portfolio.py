"""
Portfolio - Random long-only portfolios and the multi-portfolio VaR study

Returns are percent log returns. Portfolio weights apply to simple returns, and the
aggregate is converted back to a percent log return.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from risk.backtest import backtest
from risk.caviar import CaviarSpec
from risk.forecast import VAR_MODELS, fit_var_model, forecast_var
from utils.errors import ConfigError, SieveVarError
from utils.numerics import Normal, RngStream, draw, ensure_finite, sample_quantile

logger = logging.getLogger(__name__)

# Per-asset GARCH(1,1) dynamics of the synthetic fixture (unit unconditional variance)
FIXTURE_ARCH = 0.08
FIXTURE_GARCH = 0.90

# Two hidden layers for the constituent-level CAViaR network
PORTFOLIO_HIDDEN_SIZES = (80, 5)


@dataclass(frozen=True)
class AssetFixture:
    assets: List[str]
    means: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        k = len(self.assets)
        if self.means.shape != (k,) or self.covariance.shape != (k, k):
            raise ConfigError(f"Fixture for {k} assets has means {self.means.shape} and "
                              f"covariance {self.covariance.shape}")
        if not np.allclose(self.covariance, self.covariance.T):
            raise ConfigError("Fixture covariance is not symmetric")

    @classmethod
    def from_dict(cls, data: Dict) -> "AssetFixture":
        try:
            return cls(list(data["assets"]), np.asarray(data["means"], dtype=np.float64),
                       np.asarray(data["covariance"], dtype=np.float64))
        except KeyError as e:
            raise ConfigError(f"Fixture is missing {e}") from e


def portfolio_returns(asset_returns, weights) -> np.ndarray:
    """Percent log returns of a portfolio rebalanced to fixed weights each period"""
    R = ensure_finite(asset_returns, "asset_returns")
    R = R[:, None] if R.ndim == 1 else R
    w = ensure_finite(weights, "weights").ravel()
    if w.size != R.shape[1]:
        raise ValueError(f"Got {w.size} weights for {R.shape[1]} assets")
    simple = np.expm1(R / 100.0) @ w
    return 100.0 * np.log1p(simple)


def equal_weights(k: int) -> np.ndarray:
    if k < 1:
        raise ValueError(f"Need at least one asset, got {k}")
    return np.full(k, 1.0 / k)


def random_weights(k: int, count: int, stream: RngStream) -> np.ndarray:
    """count x k weights uniform on the simplex (normalised unit exponentials)"""
    if k < 1 or count < 1:
        raise ValueError(f"Need k >= 1 and count >= 1, got k={k}, count={count}")
    e = stream.generator.standard_exponential((count, k))
    return e / e.sum(axis=1, keepdims=True)


def random_portfolios(asset_returns: pd.DataFrame, count: int = 50,
                      stream: Optional[RngStream] = None):
    """(weights frame, portfolio return frame) for count random long-only portfolios"""
    if asset_returns.shape[1] < 1:
        raise ValueError("asset_returns has no columns")
    stream = stream or RngStream(0)
    W = random_weights(asset_returns.shape[1], count, stream)
    names = [f"portfolio_{i}" for i in range(count)]
    weights = pd.DataFrame(W, index=names, columns=asset_returns.columns)
    R = asset_returns.to_numpy(dtype=np.float64)
    series = pd.DataFrame({name: portfolio_returns(R, w) for name, w in zip(names, W)},
                          index=asset_returns.index)
    return weights, series


def synthetic_asset_returns(n: int, stream: RngStream, fixture: AssetFixture,
                            burn_in: int = 500) -> pd.DataFrame:
    """Asset returns matching the fixture's means and unconditional covariance

    Each asset follows a unit-variance GARCH(1,1); the standardized shocks are
    correlated through the Cholesky factor of the fixture's correlation matrix, then
    scaled by the asset standard deviation.
    """
    sd = np.sqrt(np.diag(fixture.covariance))
    corr = fixture.covariance / np.outer(sd, sd)
    chol = np.linalg.cholesky(corr)
    k = len(fixture.assets)
    total = n + burn_in
    z = draw(stream, Normal(0.0, 1.0), (total, k)) @ chol.T

    omega = 1.0 - FIXTURE_ARCH - FIXTURE_GARCH
    sigma2 = np.ones(k)
    e = np.empty((total, k))
    for t in range(total):
        e[t] = np.sqrt(sigma2) * z[t]
        sigma2 = omega + FIXTURE_ARCH * e[t] ** 2 + FIXTURE_GARCH * sigma2
    R = fixture.means + e[burn_in:] * sd
    index = pd.bdate_range("2000-01-03", periods=n, name="date")
    return pd.DataFrame(R, index=index, columns=fixture.assets)


def portfolio_caviar_spec(alpha: float, caviar: Optional[CaviarSpec] = None,
                          hidden_sizes: Sequence[int] = PORTFOLIO_HIDDEN_SIZES) -> CaviarSpec:
    """CAViaR settings for the portfolio study: the given spec with the portfolio network"""
    base = caviar or CaviarSpec(alpha=alpha)
    return replace(base, hidden_sizes=tuple(hidden_sizes))


def _study_one(name: str, returns: pd.Series, assets: np.ndarray, models: Sequence[str], alpha: float,
               holdout: int, caviar: Optional[CaviarSpec], seed: int) -> List[Dict]:
    r = returns.to_numpy(dtype=np.float64)
    train = r[:-holdout]
    q_uncond = sample_quantile(train, alpha)
    rows = []
    for tag in models:
        row = {"portfolio": name, "model": tag, "status": "ok", "error": ""}
        caviar_fit = tag == "sann-caviar"
        # The network sees the squared lags of every constituent, not of the aggregate
        features = assets if caviar_fit else None
        try:
            model = fit_var_model(tag, train, alpha, caviar, seed,
                                  features=None if features is None else features[:-holdout])
            if caviar_fit:
                row["n_inputs"] = model.report()["n_inputs"]
            forecast = forecast_var(model, r, holdout, alpha, features=features)
            report = backtest(tag, r[-holdout:], forecast.values, alpha, q_uncond,
                              model.beta if caviar_fit else None,
                              model.beta_se if caviar_fit else None)
            row.update(report.to_dict())
        except (SieveVarError, ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
            row["status"] = "failed"
            row["error"] = f"{type(e).__name__}: {e}"
            logger.warning(f"{name}, model {tag} failed: {row['error']}")
        rows.append(row)
    return rows


@dataclass
class PortfolioStudy:
    weights: pd.DataFrame
    rows: pd.DataFrame
    summary: Dict = field(default_factory=dict)


def summarize_study(rows: pd.DataFrame, models: Sequence[str], level: float = 0.05) -> Dict:
    """Mean exceedances, rejection rates at `level` and mean integrated-VaR change per model"""
    out = {}
    for tag in models:
        ok = rows[(rows["model"] == tag) & (rows["status"] == "ok")]
        duration = ok[ok["duration_status"] == "ok"] if len(ok) else ok
        out[tag] = {
            "n_ok": int(len(ok)),
            "mean_exceedances": float(ok["exceedances"].mean()) if len(ok) else None,
            "failures_rejection_rate": float((ok["failures_p"] < level).mean()) if len(ok) else None,
            "duration_rejection_rate": float((duration["duration_p"] < level).mean()) if len(duration) else None,
            "mean_integrated_var_change": float(ok["integrated_var_change"].mean()) if len(ok) else None,
        }
    return out


def run_portfolio_study(asset_returns: pd.DataFrame, count: int, alpha: float, holdout: int,
                        models: Sequence[str] = VAR_MODELS, seed: int = 0,
                        caviar: Optional[CaviarSpec] = None, n_jobs: int = 1) -> PortfolioStudy:
    """Fit and backtest every model on `count` random portfolios of the assets

    caviar defaults to the two-layer portfolio network; the CAViaR inputs are the
    lagged squared returns of the asset columns.
    """
    unknown = [m for m in models if m not in VAR_MODELS]
    if unknown:
        raise ConfigError(f"Unknown VaR models {unknown}, expected some of {VAR_MODELS}")
    if not 1 <= holdout < len(asset_returns):
        raise ConfigError(f"holdout must lie in [1, {len(asset_returns) - 1}], got {holdout}")
    master = RngStream(seed)
    weight_stream, fit_stream = master.spawn(2)
    weights, series = random_portfolios(asset_returns, count, weight_stream)
    seeds = [fit_stream.child_seed() for _ in range(count)]
    caviar = caviar or portfolio_caviar_spec(alpha)
    assets = asset_returns.to_numpy(dtype=np.float64)

    logger.info(f"Portfolio study: {count} portfolios, models {list(models)}, alpha={alpha}")
    outputs = Parallel(n_jobs=n_jobs)(
        delayed(_study_one)(name, series[name], assets, models, alpha, holdout, caviar, s)
        for name, s in zip(series.columns, seeds)
    )
    rows = pd.DataFrame([row for block in outputs for row in block])
    return PortfolioStudy(weights, rows, summarize_study(rows, models))
