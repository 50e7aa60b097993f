"""
GARCH - Gaussian GARCH(1,1) quasi-maximum likelihood baseline

sigma2_t = omega + a * e_{t-1}^2 + b * sigma2_{t-1}, e_t = r_t - mu. The optimizer works
on (log omega, logit persistence, logit share) so omega > 0, a, b >= 0 and a + b < 1
hold for every trial point.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import optimize, signal, special, stats

from utils.errors import ConvergenceError, DegenerateDataError
from utils.numerics import Normal, RngStream, StudentT, draw, ensure_finite

logger = logging.getLogger(__name__)

MIN_OBSERVATIONS = 300
GRADIENT_TOLERANCE = 1e-3

# (persistence, share of a in the persistence) starting points
_STARTS = ((0.95, 0.05), (0.90, 0.10), (0.98, 0.03), (0.50, 0.30))


@dataclass(frozen=True)
class GarchSpec:
    p: int = 1
    q: int = 1
    distribution: str = "normal"

    def __post_init__(self):
        if (self.p, self.q) != (1, 1):
            raise ValueError(f"Only GARCH(1,1) is supported, got ({self.p},{self.q})")
        if self.distribution != "normal":
            raise ValueError(f"Only the normal distribution is supported, got {self.distribution}")


@dataclass(frozen=True)
class GarchFit:
    mu: float
    omega: float
    alpha: float
    beta: float
    sigma: np.ndarray
    loglik: float
    gradient_norm: float
    start_variance: float

    @property
    def tag(self) -> str:
        return "garch"

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    def conditional_sigma(self, returns) -> np.ndarray:
        """One-step-ahead sigma_t over a return series with the fitted parameters"""
        r = ensure_finite(returns, "returns").ravel()
        return np.sqrt(garch_variance(r - self.mu, self.omega, self.alpha, self.beta,
                                      self.start_variance))

    def var_path(self, returns, alpha: float) -> np.ndarray:
        """mu + z_alpha * sigma_t for every period"""
        return self.mu + stats.norm.ppf(alpha) * self.conditional_sigma(returns)

    def report(self) -> dict:
        return {"mu": self.mu, "omega": self.omega, "alpha": self.alpha, "beta": self.beta,
                "loglik": self.loglik, "gradient_norm": self.gradient_norm}


def garch_variance(resid: np.ndarray, omega: float, a: float, b: float,
                   start_variance: float) -> np.ndarray:
    """sigma2_t given information up to t-1; sigma2_0 is the start variance"""
    shocks = np.empty_like(resid)
    shocks[0] = omega + a * start_variance
    shocks[1:] = omega + a * resid[:-1] ** 2
    sigma2, _ = signal.lfilter([1.0], [1.0, -b], shocks, zi=[b * start_variance])
    return sigma2


def _unpack(theta: np.ndarray) -> Tuple[float, float, float, float]:
    mu, log_omega, logit_persistence, logit_share = theta
    persistence = special.expit(logit_persistence)
    share = special.expit(logit_share)
    return float(mu), float(np.exp(log_omega)), persistence * share, persistence * (1.0 - share)


def _mean_nll(theta: np.ndarray, r: np.ndarray, start_variance: float) -> float:
    mu, omega, a, b = _unpack(theta)
    sigma2 = garch_variance(r - mu, omega, a, b, start_variance)
    if not np.all(np.isfinite(sigma2)) or np.any(sigma2 <= 0):
        return 1e10
    return float(0.5 * np.mean(np.log(2.0 * np.pi) + np.log(sigma2) + (r - mu) ** 2 / sigma2))


def fit_garch11(returns, spec: Optional[GarchSpec] = None) -> GarchFit:
    """Gaussian QMLE of a GARCH(1,1) with constant mean

    Raises:
        DegenerateDataError: constant returns
        ConvergenceError: no start reached a stationary point (carries the gradient norm)
    """
    spec = spec or GarchSpec()
    r = ensure_finite(returns, "returns").ravel()
    if r.size < MIN_OBSERVATIONS:
        raise ValueError(f"GARCH needs at least {MIN_OBSERVATIONS} returns, got {r.size}")
    variance = float(np.var(r))
    if variance <= 0.0:
        raise DegenerateDataError("Cannot fit GARCH to constant returns")

    best = None
    for persistence, share in _STARTS:
        theta0 = np.array([
            float(np.mean(r)),
            np.log(variance * (1.0 - persistence)),
            special.logit(persistence),
            special.logit(share),
        ])
        res = optimize.minimize(_mean_nll, theta0, args=(r, variance), method="L-BFGS-B")
        if best is None or res.fun < best.fun:
            best = res

    gradient = optimize.approx_fprime(best.x, _mean_nll, 1e-6, r, variance)
    gradient_norm = float(np.linalg.norm(gradient))
    if not (best.success or gradient_norm < GRADIENT_TOLERANCE):
        raise ConvergenceError(
            f"GARCH optimizer did not converge: {best.message} (gradient norm {gradient_norm:.3e})",
            gradient_norm=gradient_norm,
        )

    mu, omega, a, b = _unpack(best.x)
    sigma = np.sqrt(garch_variance(r - mu, omega, a, b, variance))
    logger.info(f"GARCH(1,1): mu={mu:.4f}, omega={omega:.4f}, alpha={a:.4f}, beta={b:.4f}")
    return GarchFit(mu, omega, a, b, sigma, float(-best.fun * r.size), gradient_norm, variance)


def simulate_garch11(omega: float, alpha: float, beta: float, n: int, stream: RngStream,
                     mu: float = 0.0, burn_in: int = 500,
                     innovation_df: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """GARCH(1,1) returns and their true conditional sigma

    Innovations are standard normal, or unit-variance Student-t when innovation_df is set.
    """
    if not (omega > 0 and alpha >= 0 and beta >= 0 and alpha + beta < 1):
        raise ValueError(f"Need omega > 0, alpha, beta >= 0 and alpha + beta < 1, "
                         f"got {omega}, {alpha}, {beta}")
    total = n + burn_in
    if innovation_df is None:
        z = draw(stream, Normal(0.0, 1.0), total)
    elif innovation_df > 2:
        z = draw(stream, StudentT(innovation_df), total) * np.sqrt((innovation_df - 2.0) / innovation_df)
    else:
        raise ValueError(f"Student-t innovations need df > 2 for a finite variance, got {innovation_df}")
    sigma2 = np.empty(total)
    e = np.empty(total)
    sigma2[0] = omega / (1.0 - alpha - beta)
    e[0] = np.sqrt(sigma2[0]) * z[0]
    for t in range(1, total):
        sigma2[t] = omega + alpha * e[t - 1] ** 2 + beta * sigma2[t - 1]
        e[t] = np.sqrt(sigma2[t]) * z[t]
    return mu + e[burn_in:], np.sqrt(sigma2[burn_in:])


def garch_returns_frame(omega: float, alpha: float, beta: float, n: int, seed: int = 0,
                        column: str = "returns", innovation_df: Optional[float] = None) -> pd.DataFrame:
    """Simulated GARCH(1,1) returns as a frame with a business-day index"""
    returns, sigma = simulate_garch11(omega, alpha, beta, n, RngStream(seed), innovation_df=innovation_df)
    index = pd.bdate_range("2000-01-03", periods=n, name="date")
    return pd.DataFrame({column: returns, "true_sigma": sigma}, index=index)
