"""
Backtest - Statistical checks of a VaR forecast path

An exceedance ("hit") is a period whose return falls strictly below its VaR. The
failures test compares the hit rate with alpha (likelihood ratio, chi-square with one
degree of freedom); the duration test fits a Weibull law to the spacing between hits
and tests for the memoryless exponential case.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np
from scipy import optimize, special

from utils.errors import DegenerateDataError
from utils.numerics import chi_square_sf, ensure_finite

logger = logging.getLogger(__name__)

_SHAPE_BOUNDS = (np.log(0.01), np.log(100.0))


def hit_sequence(returns, var_path) -> np.ndarray:
    r = ensure_finite(returns, "returns").ravel()
    v = ensure_finite(var_path, "var_path").ravel()
    if r.size != v.size:
        raise ValueError(f"Got {r.size} returns and {v.size} VaR values")
    return r < v


@dataclass(frozen=True)
class LikelihoodRatio:
    statistic: float
    p_value: float
    status: str = "ok"


def failures_test(hits, alpha: float) -> LikelihoodRatio:
    """Unconditional coverage likelihood ratio; 0 * ln 0 is taken as 0"""
    h = np.asarray(hits, dtype=bool).ravel()
    T = h.size
    if T == 0:
        raise ValueError("Empty hit sequence")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    x = int(h.sum())
    p_hat = x / T
    restricted = special.xlogy(T - x, 1.0 - alpha) + special.xlogy(x, alpha)
    unrestricted = special.xlogy(T - x, 1.0 - p_hat) + special.xlogy(x, p_hat)
    lr = max(-2.0 * (restricted - unrestricted), 0.0)
    return LikelihoodRatio(float(lr), chi_square_sf(lr, 1))


def hit_durations(hits):
    """Durations between hits plus the censored spells before the first and after the last

    Returns (durations, censored flags). Positions are 1-based, so a first hit on day t
    gives a first spell of t days.
    """
    h = np.asarray(hits, dtype=bool).ravel()
    positions = np.flatnonzero(h) + 1
    durations = list(np.diff(positions))
    censored = [False] * len(durations)
    if positions.size and not h[0]:
        durations.insert(0, int(positions[0]))
        censored.insert(0, True)
    if positions.size and not h[-1]:
        durations.append(int(h.size - positions[-1]))
        censored.append(True)
    return np.asarray(durations, dtype=np.float64), np.asarray(censored, dtype=bool)


def _profile_loglik(log_b: float, d: np.ndarray, uncensored: np.ndarray) -> float:
    b = np.exp(log_b)
    n_u = int(uncensored.sum())
    s_b = float(np.sum(d ** b))
    return n_u * np.log(n_u / s_b) + n_u * log_b + (b - 1.0) * float(np.sum(np.log(d[uncensored]))) - n_u


def duration_test(hits) -> LikelihoodRatio:
    """Weibull duration likelihood ratio for shape b = 1

    The Weibull scale is profiled out; the shape is searched on [0.01, 100]. Fewer than
    two hits leave no complete duration and give status "not_applicable".
    """
    h = np.asarray(hits, dtype=bool).ravel()
    if int(h.sum()) < 2:
        return LikelihoodRatio(float("nan"), float("nan"), "not_applicable")
    d, censored = hit_durations(h)
    uncensored = ~censored

    res = optimize.minimize_scalar(lambda lb: -_profile_loglik(lb, d, uncensored),
                                   bounds=_SHAPE_BOUNDS, method="bounded",
                                   options={"xatol": 1e-8})
    unrestricted = max(-float(res.fun), _profile_loglik(0.0, d, uncensored))
    lr = max(2.0 * (unrestricted - _profile_loglik(0.0, d, uncensored)), 0.0)
    logger.debug(f"Duration test: shape {np.exp(res.x):.4f}, LR {lr:.4f}")
    return LikelihoodRatio(float(lr), chi_square_sf(lr, 1))


def integrated_var_change(var_path, q_uncond: float) -> float:
    """Percentage change of summed |VaR| against a constant unconditional quantile"""
    v = ensure_finite(var_path, "var_path").ravel()
    if v.size == 0:
        raise ValueError("Empty VaR path")
    if not np.isfinite(q_uncond) or q_uncond == 0.0:
        raise DegenerateDataError(f"Unconditional quantile must be finite and non-zero, got {q_uncond}")
    baseline = v.size * abs(q_uncond)
    return float(100.0 * (np.sum(np.abs(v)) - baseline) / baseline)


@dataclass(frozen=True)
class VarBacktestReport:
    model: str
    alpha: float
    n_obs: int
    exceedances: int
    expected_exceedances: float
    hit_rate: float
    failures_lr: float
    failures_p: float
    duration_lr: float
    duration_p: float
    duration_status: str
    integrated_var_change: float
    coefficient: Optional[float] = None
    coefficient_se: Optional[float] = None

    def rejects(self, level: float = 0.05) -> Dict[str, bool]:
        return {
            "failures": bool(self.failures_p < level),
            "duration": bool(self.duration_status == "ok" and self.duration_p < level),
        }

    def to_dict(self) -> Dict:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, float) and not np.isfinite(value):
                out[key] = None
        return out


def backtest(model_tag: str, returns, var_path, alpha: float, q_uncond: float,
             coefficient: Optional[float] = None,
             coefficient_se: Optional[float] = None) -> VarBacktestReport:
    hits = hit_sequence(returns, var_path)
    failures = failures_test(hits, alpha)
    duration = duration_test(hits)
    report = VarBacktestReport(
        model=model_tag,
        alpha=float(alpha),
        n_obs=int(hits.size),
        exceedances=int(hits.sum()),
        expected_exceedances=float(alpha * hits.size),
        hit_rate=float(hits.mean()),
        failures_lr=failures.statistic,
        failures_p=failures.p_value,
        duration_lr=duration.statistic,
        duration_p=duration.p_value,
        duration_status=duration.status,
        integrated_var_change=integrated_var_change(var_path, q_uncond),
        coefficient=coefficient,
        coefficient_se=coefficient_se,
    )
    logger.info(f"{model_tag}: {report.exceedances} exceedances of {report.n_obs} "
                f"(expected {report.expected_exceedances:.1f}), failures p={report.failures_p:.3f}")
    return report
