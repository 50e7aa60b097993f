"""
Forecast - One-step-ahead VaR paths from fitted quantile models

Parameters stay frozen after fitting; realised returns feed the recursion over the
whole series and the last `holdout` values form the out-of-sample forecast.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd

from risk.caviar import CaviarSpec, ConstantQuantileModel, fit_caviar, fit_sav_caviar
from risk.garch import fit_garch11
from utils.errors import ConfigError
from utils.numerics import RngStream, ensure_finite

logger = logging.getLogger(__name__)

VAR_MODELS = ("sann-caviar", "garch", "sav-caviar", "constant")


@dataclass(frozen=True)
class VarForecastSeries:
    values: np.ndarray
    model: str
    alpha: float
    in_sample: bool
    index: Optional[pd.Index] = None

    def to_frame(self, returns) -> pd.DataFrame:
        """date, return, var, exceed columns for plotting"""
        r = ensure_finite(returns, "returns").ravel()
        if r.size != self.values.size:
            raise ValueError(f"Got {r.size} returns for {self.values.size} VaR values")
        index = self.index if self.index is not None else pd.RangeIndex(r.size)
        return pd.DataFrame({
            "date": [str(i) for i in index],
            "return": r,
            "var": self.values,
            "exceed": (r < self.values).astype(int),
        })


def fit_var_model(tag: str, train_returns, alpha: float, caviar: Optional[CaviarSpec] = None,
                  seed: int = 0, features=None):
    """Fit one of VAR_MODELS on the training returns"""
    if tag not in VAR_MODELS:
        raise ConfigError(f"Unknown VaR model '{tag}', expected one of {VAR_MODELS}")
    r = ensure_finite(train_returns, "returns").ravel()
    if tag == "sann-caviar":
        spec = caviar or CaviarSpec(alpha=alpha)
        if spec.alpha != alpha:
            raise ConfigError(f"CAViaR alpha {spec.alpha} does not match the run alpha {alpha}")
        spec = replace(spec, train=replace(spec.train, seed=seed))
        return fit_caviar(spec, r, features)
    if tag == "garch":
        return fit_garch11(r)
    if tag == "sav-caviar":
        return fit_sav_caviar(r, alpha, RngStream(seed))
    return ConstantQuantileModel(alpha).fit(r)


def forecast_var(model, returns, holdout: int, alpha: float, horizon: int = 1,
                 features=None) -> VarForecastSeries:
    """Out-of-sample VaR for the last `holdout` periods of returns

    returns is the full series (training part first); features, when the model was
    fitted on exogenous inputs, must cover the same rows.
    """
    if horizon != 1:
        raise ValueError(f"Only one-step-ahead forecasts are supported, got horizon={horizon}")
    index = returns.index if isinstance(returns, (pd.Series, pd.DataFrame)) else None
    r = ensure_finite(returns, "returns").ravel()
    if not 1 <= holdout <= r.size:
        raise ValueError(f"holdout must lie in [1, {r.size}], got {holdout}")
    if features is not None:
        path = model.var_path(r, alpha, features=features)
    else:
        path = model.var_path(r, alpha)
    tag = model.tag
    logger.debug(f"{tag}: forecast {holdout} periods")
    return VarForecastSeries(
        values=np.asarray(path[-holdout:], dtype=np.float64),
        model=tag,
        alpha=float(alpha),
        in_sample=False,
        index=index[-holdout:] if index is not None else None,
    )


def in_sample_var(model, train_returns, alpha: float, features=None) -> VarForecastSeries:
    index = train_returns.index if isinstance(train_returns, (pd.Series, pd.DataFrame)) else None
    r = ensure_finite(train_returns, "returns").ravel()
    path = model.var_path(r, alpha, features=features) if features is not None else model.var_path(r, alpha)
    return VarForecastSeries(np.asarray(path, dtype=np.float64), model.tag, float(alpha), True, index)
