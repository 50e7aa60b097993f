"""
Kernel - Local-linear kernel regression baseline and AMISE rate curves

Second-order Gaussian kernel (product form for several regressors) with Silverman
rule-of-thumb bandwidths. Evaluation is pointwise: every query point solves its own
weighted least-squares problem.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from utils.errors import DegenerateDataError, SingularSystemError
from utils.numerics import ensure_finite, ols_solve

logger = logging.getLogger(__name__)

BANDWIDTH_RULES = ("silverman_uni", "silverman_multi")


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian local-linear smoother settings

    Either explicit per-column bandwidths or a rule-of-thumb. corrected_exponent
    switches the multivariate rule from n^(1/(2P+l)) to n^(-1/(2P+l)).
    """

    bandwidths: Optional[Tuple[float, ...]] = None
    rule: str = "silverman_uni"
    order: int = 2
    corrected_exponent: bool = False

    def __post_init__(self):
        if self.bandwidths is not None:
            object.__setattr__(self, "bandwidths", tuple(float(h) for h in self.bandwidths))
            if len(self.bandwidths) == 0 or not all(np.isfinite(h) and h > 0 for h in self.bandwidths):
                raise ValueError(f"Bandwidths must be positive and finite, got {self.bandwidths}")
        if self.rule not in BANDWIDTH_RULES:
            raise ValueError(f"Unknown bandwidth rule '{self.rule}', expected one of {BANDWIDTH_RULES}")
        if self.order < 1:
            raise ValueError(f"Kernel order must be >= 1, got {self.order}")

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> "KernelSpec":
        data = dict(data or {})
        bandwidths = data.get("bandwidths")
        return cls(
            bandwidths=tuple(bandwidths) if bandwidths is not None else None,
            rule=data.get("rule", "silverman_uni"),
            order=int(data.get("order", 2)),
            corrected_exponent=bool(data.get("corrected_exponent", False)),
        )


# ── Bandwidths ───────────────────────────────────────────────────────────────

def silverman_bandwidth(values) -> float:
    """(4 sigma^5 / (3n))^(1/5) with sigma the sample standard deviation"""
    x = ensure_finite(values, "values").ravel()
    if x.size < 2:
        raise ValueError(f"Need at least 2 observations for a bandwidth, got {x.size}")
    sigma = float(np.std(x, ddof=1))
    if sigma <= 0.0:
        raise DegenerateDataError("Cannot choose a bandwidth for a constant column")
    return (4.0 * sigma ** 5 / (3.0 * x.size)) ** 0.2


def robust_scale(values) -> float:
    """min(std, normal-consistent MAD, IQR / 1.346)"""
    x = ensure_finite(values, "values").ravel()
    std = float(np.std(x, ddof=1))
    mad = float(stats.median_abs_deviation(x, scale="normal"))
    iqr = float(stats.iqr(x)) / 1.346
    return min(std, mad, iqr)


def silverman_multi_bandwidth(frame, order: int = 2, n_vars: Optional[int] = None,
                              corrected: bool = False, n: Optional[int] = None) -> np.ndarray:
    """1.06 * sigma_j * n^(1/(2P + l)) per column

    The exponent is positive as the rule is usually printed; corrected=True uses the
    shrinking n^(-1/(2P + l)) form. `n` overrides the sample size in the power term.
    """
    X = ensure_finite(frame, "frame")
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError(f"Need at least 2 observations for a bandwidth, got {X.shape[0]}")
    l = X.shape[1] if n_vars is None else int(n_vars)
    if order < 1 or l < 1:
        raise ValueError(f"Need order >= 1 and n_vars >= 1, got order={order}, n_vars={l}")
    size = X.shape[0] if n is None else int(n)
    if size < 1:
        raise ValueError(f"n must be >= 1, got {size}")

    exponent = 1.0 / (2 * order + l)
    if corrected:
        exponent = -exponent
    bandwidths = np.empty(X.shape[1])
    for j in range(X.shape[1]):
        if np.ptp(X[:, j]) == 0.0:
            raise DegenerateDataError(f"Cannot choose a bandwidth for constant column {j}")
        sigma = robust_scale(X[:, j])
        if sigma <= 0.0:
            # More than half the observations tie; fall back to the standard deviation
            sigma = float(np.std(X[:, j], ddof=1))
        bandwidths[j] = 1.06 * sigma * size ** exponent
    return bandwidths


def resolve_bandwidths(spec: KernelSpec, Z) -> np.ndarray:
    """Per-column bandwidths for regressors Z: explicit values, or the KernelSpec rule"""
    Z = ensure_finite(Z, "Z")
    if Z.ndim == 1:
        Z = Z[:, None]
    if spec.bandwidths is not None:
        if len(spec.bandwidths) != Z.shape[1]:
            raise ValueError(f"Got {len(spec.bandwidths)} bandwidths for {Z.shape[1]} regressors")
        return np.asarray(spec.bandwidths)
    if spec.rule == "silverman_multi":
        return silverman_multi_bandwidth(Z, spec.order, corrected=spec.corrected_exponent)
    return np.array([silverman_bandwidth(Z[:, j]) for j in range(Z.shape[1])])


# ── Local-linear smoother ────────────────────────────────────────────────────

def kernel_weights(Z: np.ndarray, x0: np.ndarray, bandwidths: np.ndarray) -> np.ndarray:
    """Product Gaussian weights, rescaled so the largest weight is 1"""
    log_w = -0.5 * np.sum(((Z - x0) / bandwidths) ** 2, axis=1)
    return np.exp(log_w - np.max(log_w))


def _local_solve(Z: np.ndarray, Y: np.ndarray, x0: np.ndarray, bandwidths: np.ndarray):
    root_w = np.sqrt(kernel_weights(Z, x0, bandwidths))
    design = np.hstack([np.ones((Z.shape[0], 1)), Z - x0]) * root_w[:, None]
    target = Y * (root_w[:, None] if Y.ndim == 2 else root_w)
    try:
        coef = ols_solve(design, target)
    except SingularSystemError as e:
        raise SingularSystemError(
            f"Local design at x0={x0.tolist()} is singular; try a larger bandwidth "
            f"(current {bandwidths.tolist()})",
            n_offending=e.n_offending, columns=e.columns,
        ) from e
    return coef[0]


def local_linear_predict(Z, Y, Zq, bandwidths) -> np.ndarray:
    """Local-linear estimates at every row of Zq

    Y may hold several responses as columns; they share the kernel weights.
    """
    Z = ensure_finite(Z, "Z")
    Z = Z[:, None] if Z.ndim == 1 else Z
    Zq = ensure_finite(Zq, "query points")
    Zq = Zq.reshape(-1, Z.shape[1]) if Zq.ndim == 1 else Zq
    Y = ensure_finite(Y, "Y")
    h = ensure_finite(bandwidths, "bandwidths").ravel()
    if Y.shape[0] != Z.shape[0]:
        raise ValueError(f"Z has {Z.shape[0]} rows but Y has {Y.shape[0]}")
    if Zq.shape[1] != Z.shape[1] or h.size != Z.shape[1]:
        raise ValueError("Query points, bandwidths and regressors disagree on dimension")
    if np.any(h <= 0):
        raise ValueError(f"Bandwidths must be positive, got {h.tolist()}")

    out = np.empty((Zq.shape[0],) + Y.shape[1:])
    for i, x0 in enumerate(Zq):
        out[i] = _local_solve(Z, Y, x0, h)
    return out


def local_linear_fit(spec: KernelSpec, data: pd.DataFrame, x0,
                     columns: Optional[Sequence[str]] = None, target: str = "y") -> float:
    """Local-linear prediction at a single query point x0

    columns defaults to every column of data except the target.
    """
    if columns is None:
        columns = [c for c in data.columns if c != target]
    missing = [c for c in list(columns) + [target] if c not in data.columns]
    if missing:
        raise KeyError(f"Data is missing columns: {missing}")
    Z = data.loc[:, list(columns)].to_numpy(dtype=np.float64)
    y = data[target].to_numpy(dtype=np.float64)
    h = resolve_bandwidths(spec, Z)
    x0 = ensure_finite(x0, "x0").ravel()
    if x0.size != Z.shape[1]:
        raise ValueError(f"x0 has dimension {x0.size}, data has {Z.shape[1]} regressors")
    return float(local_linear_predict(Z, y, x0.reshape(1, -1), h)[0])


class LocalLinearRegressor:
    """Stores training data and bandwidths; prediction is pointwise"""

    def __init__(self, spec: Optional[KernelSpec] = None):
        self.spec = spec or KernelSpec()
        self.Z: Optional[np.ndarray] = None
        self.y: Optional[np.ndarray] = None
        self.bandwidths: Optional[np.ndarray] = None

    def fit(self, Z, y) -> "LocalLinearRegressor":
        Z = ensure_finite(Z, "Z")
        self.Z = Z[:, None] if Z.ndim == 1 else Z
        self.y = ensure_finite(y, "y")
        self.bandwidths = resolve_bandwidths(self.spec, self.Z)
        logger.debug(f"Local-linear bandwidths: {np.round(self.bandwidths, 4).tolist()}")
        return self

    def predict(self, Zq) -> np.ndarray:
        if self.Z is None:
            raise RuntimeError("LocalLinearRegressor.predict called before fit")
        return local_linear_predict(self.Z, self.y, Zq, self.bandwidths)


# ── AMISE rates ──────────────────────────────────────────────────────────────

@dataclass
class RateCurve:
    estimator: str
    dim: int
    order: int
    exponent: float
    n: np.ndarray
    rates: np.ndarray


def kernel_rate_exponent(order: int, dim: int) -> float:
    return -2.0 * order / (2.0 * order + dim)


def sieve_rate_exponent(dim: int) -> float:
    return -(1.0 + 2.0 / (dim + 1)) / (4.0 * (1.0 + 1.0 / (dim + 1)))


def amise_rates(estimator: str, n_grid, dim: int, order: int = 2) -> RateCurve:
    """Optimal AMISE exponent and rate values on an n grid, constants ignored

    kernel: n^(-2 order / (2 order + dim)); sieve: (n / ln n)^exponent.
    """
    if dim < 1 or order < 1:
        raise ValueError(f"Need dim >= 1 and order >= 1, got dim={dim}, order={order}")
    n = ensure_finite(n_grid, "n grid").ravel()
    if estimator == "kernel":
        if np.any(n <= 0):
            raise ValueError("Kernel rates need positive sample sizes")
        exponent = kernel_rate_exponent(order, dim)
        rates = n ** exponent
    elif estimator == "sieve":
        if np.any(n <= 1):
            raise ValueError("Sieve rates need sample sizes above 1")
        exponent = sieve_rate_exponent(dim)
        rates = (n / np.log(n)) ** exponent
    else:
        raise ValueError(f"Unknown estimator '{estimator}', expected 'kernel' or 'sieve'")
    return RateCurve(estimator, dim, order, exponent, n, rates)


def rates_table(dims: Sequence[int], order: int = 2, n_grid=None) -> pd.DataFrame:
    """Long table of kernel and sieve exponents and rates per dimension and n"""
    if n_grid is None:
        n_grid = np.unique(np.round(np.logspace(2, 5, 31))).astype(int)
    rows = []
    for dim in dims:
        kern = amise_rates("kernel", n_grid, dim, order)
        sieve = amise_rates("sieve", n_grid, dim, order)
        for n, k_rate, s_rate in zip(kern.n, kern.rates, sieve.rates):
            rows.append({
                "dim": int(dim),
                "n": int(n),
                "kernel_exponent": kern.exponent,
                "sieve_exponent": sieve.exponent,
                "kernel_rate": float(k_rate),
                "sieve_rate": float(s_rate),
            })
    return pd.DataFrame(rows, columns=["dim", "n", "kernel_exponent", "sieve_exponent",
                                       "kernel_rate", "sieve_rate"])
