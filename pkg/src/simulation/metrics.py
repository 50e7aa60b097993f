"""
Metrics - Prediction errors and the pointwise bias/variance decomposition
"""

import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy import linalg

from utils.numerics import ensure_finite, trapezoid_integrate

logger = logging.getLogger(__name__)


def mspe(y, y_hat) -> float:
    y = ensure_finite(y, "y").ravel()
    y_hat = ensure_finite(y_hat, "predictions").ravel()
    if y.size != y_hat.size or y.size == 0:
        raise ValueError(f"Got {y.size} observations and {y_hat.size} predictions")
    return float(np.mean((y - y_hat) ** 2))


def rmspe(y, y_hat) -> float:
    return float(np.sqrt(mspe(y, y_hat)))


@dataclass
class BiasVarianceCurves:
    truth: np.ndarray
    mean_prediction: np.ndarray
    bias2: np.ndarray
    var_e: np.ndarray
    mse: np.ndarray

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {
            "truth": self.truth,
            "mean_prediction": self.mean_prediction,
            "bias2": self.bias2,
            "var_e": self.var_e,
            "mse": self.mse,
        }


def bias_variance_curves(predictions, truth) -> BiasVarianceCurves:
    """Pointwise Bias^2, Var_e and MSE over N replications (rows of predictions)

    Bias^2(t) = (mean_j yhat_tj - psi_t)^2, Var_e(t) = mean_j (yhat_tj - mean_j yhat_tj)^2,
    MSE(t) = mean_j (psi_t - yhat_tj)^2; all averages divide by N so MSE = Bias^2 + Var_e.
    """
    P = ensure_finite(predictions, "predictions")
    P = P[None, :] if P.ndim == 1 else P
    psi = ensure_finite(truth, "truth").ravel()
    if P.shape[1] != psi.size:
        raise ValueError(f"Predictions cover {P.shape[1]} grid points, truth has {psi.size}")

    mean_pred = P.mean(axis=0)
    bias2 = (mean_pred - psi) ** 2
    var_e = np.mean((P - mean_pred) ** 2, axis=0)
    mse = np.mean((psi - P) ** 2, axis=0)

    scale = max(1.0, float(np.max(mse)))
    gap = float(np.max(np.abs(mse - (bias2 + var_e))))
    if gap > 1e-10 * scale:
        raise ArithmeticError(f"MSE decomposition violated by {gap:.3e}")
    return BiasVarianceCurves(psi, mean_pred, bias2, var_e, mse)


def integrated_metrics(grid, curves: BiasVarianceCurves) -> Dict[str, float]:
    """Trapezoid integrals of the pointwise curves over the evaluation grid"""
    return {
        "integrated_bias2": trapezoid_integrate(grid, curves.bias2),
        "integrated_var_e": trapezoid_integrate(grid, curves.var_e),
        "integrated_mse": trapezoid_integrate(grid, curves.mse),
    }


def sieve_variance_term(features, residuals) -> float:
    """n^-1 trace(E^-1 Omega) with E = G'G/n and Omega = G' diag(e^2) G / n"""
    G = ensure_finite(features, "features")
    e = ensure_finite(residuals, "residuals").ravel()
    n = G.shape[0]
    if e.size != n:
        raise ValueError(f"features have {n} rows but residuals have {e.size}")
    gram = G.T @ G / n
    omega = (G * (e ** 2)[:, None]).T @ G / n
    return float(np.trace(linalg.solve(gram, omega, assume_a="sym")) / n)


def summarize(values) -> Dict[str, float]:
    arr = np.asarray(values, dtype=np.float64)
    arr = arr[np.isfinite(arr)]
    if arr.size == 0:
        return {"mean": float("nan"), "sd": float("nan")}
    sd = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(np.mean(arr)), "sd": sd}
