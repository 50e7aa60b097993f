"""
PLM - Partially linear models y = x'zeta + phi(z) + e

fit_sann trains the augmented sieve network (linear skip inputs plus ReLU sieve),
takes its final-layer features G(z) and recovers zeta by partialling those features
out of x and y. fit_linear and fit_kernel_plm are the OLS and kernel (Robinson-style)
benchmarks.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from models.kernel import KernelSpec, local_linear_predict, resolve_bandwidths
from models.sieve_net import (
    SieveNetArch, SieveNetParams, TrainConfig, forward_batch, hidden_features,
    params_to_dict, train,
)
from utils.errors import SingularSystemError
from utils.numerics import ensure_finite, ols_solve

logger = logging.getLogger(__name__)

ZERO_COLUMN_NORM = 1e-8
COLLINEAR_TOLERANCE = 1e-10


@dataclass(frozen=True)
class PlmSpec:
    """Partially linear model definition; the parametric part has no constant"""

    linear_columns: Tuple[str, ...]
    nonparam_columns: Tuple[str, ...]
    target: str = "y"
    hidden_sizes: Tuple[int, ...] = (50,)
    activation: str = "relu"
    clip: Optional[float] = None
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        object.__setattr__(self, "linear_columns", tuple(self.linear_columns))
        object.__setattr__(self, "nonparam_columns", tuple(self.nonparam_columns))
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if not self.linear_columns:
            raise ValueError("A partially linear model needs at least one linear column")
        if not self.nonparam_columns:
            raise ValueError("A partially linear model needs at least one nonparametric column")
        if self.target in self.linear_columns or self.target in self.nonparam_columns:
            raise ValueError(f"Target '{self.target}' cannot also be a regressor")

    @property
    def overlap(self) -> List[str]:
        return sorted(set(self.linear_columns) & set(self.nonparam_columns))

    @property
    def arch(self) -> SieveNetArch:
        return SieveNetArch(self.nonparam_columns, self.hidden_sizes, self.activation,
                            self.clip, self.linear_columns)

    @classmethod
    def from_dict(cls, data: Dict) -> "PlmSpec":
        return cls(
            linear_columns=tuple(data["linear_columns"]),
            nonparam_columns=tuple(data["nonparam_columns"]),
            target=data.get("target", "y"),
            hidden_sizes=tuple(data.get("hidden_sizes", (50,))),
            activation=data.get("activation", "relu"),
            clip=data.get("clip"),
            train=TrainConfig.from_dict(data.get("train")),
        )


@dataclass(frozen=True)
class PruneReport:
    kept: List[int]
    zero: List[int]
    collinear: List[int]

    @property
    def pruned(self) -> List[int]:
        return sorted(self.zero + self.collinear)


@dataclass(frozen=True)
class SannFit:
    spec: PlmSpec
    beta_hat: np.ndarray
    std_errors: np.ndarray
    sieve: SieveNetParams
    fitted_values: np.ndarray
    residuals: np.ndarray
    prune_report: PruneReport
    overlap_warning: bool
    train_summary: Dict

    @property
    def pruned_columns(self) -> List[int]:
        return self.prune_report.pruned

    @property
    def kept_features(self) -> List[int]:
        return self.prune_report.kept

    def coefficients(self) -> Dict[str, float]:
        return dict(zip(self.spec.linear_columns, self.beta_hat.tolist()))


# ── Linear algebra of the two-step estimator ─────────────────────────────────

def partial_out(matrix, features) -> np.ndarray:
    """Residual maker M_G applied to each column of matrix"""
    M = ensure_finite(matrix, "matrix")
    G = ensure_finite(features, "features")
    return M - G @ ols_solve(G, M)


def two_step_beta(X, y, features) -> np.ndarray:
    """OLS of (y - E[y|G]) on (X - E[X|G])"""
    X = ensure_finite(X, "X")
    X = X[:, None] if X.ndim == 1 else X
    X_tilde = partial_out(X, features)
    y_tilde = partial_out(y, features)
    return ols_solve(X_tilde, y_tilde)


def hc0_std_errors(X, resid) -> np.ndarray:
    """Heteroskedasticity-robust (HC0) sandwich standard errors"""
    X = ensure_finite(X, "X")
    X = X[:, None] if X.ndim == 1 else X
    e = ensure_finite(resid, "residuals").ravel()
    bread = np.linalg.inv(X.T @ X)
    meat = (X * (e ** 2)[:, None]).T @ X
    cov = bread @ meat @ bread
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def classical_std_errors(X, resid, df_resid: int) -> np.ndarray:
    X = ensure_finite(X, "X")
    e = ensure_finite(resid, "residuals").ravel()
    if df_resid < 1:
        raise ValueError(f"No residual degrees of freedom left ({df_resid})")
    s2 = float(e @ e) / df_resid
    return np.sqrt(np.clip(s2 * np.diag(np.linalg.inv(X.T @ X)), 0.0, None))


def prune_features(features, protected=None) -> PruneReport:
    """Drop all-zero feature columns and columns collinear with earlier ones

    protected columns (the linear regressors) are placed ahead of the features when
    testing collinearity and are never dropped; if one of them is collinear the design
    is not identified and SingularSystemError is raised.
    """
    G = ensure_finite(features, "features")
    P = np.zeros((G.shape[0], 0)) if protected is None else ensure_finite(protected, "protected")
    P = P[:, None] if P.ndim == 1 else P
    n_protected = P.shape[1]

    norms = np.linalg.norm(G, axis=0)
    zero = np.flatnonzero(norms < ZERO_COLUMN_NORM).tolist()
    kept = [j for j in range(G.shape[1]) if j not in set(zero)]
    collinear: List[int] = []

    while True:
        design = np.hstack([P, G[:, kept]])
        if design.shape[1] == 0:
            break
        r = np.linalg.qr(design, mode="r")
        scale = max(float(np.max(np.linalg.norm(design, axis=0))), 1.0)
        deficient = np.flatnonzero(np.abs(np.diag(r)) <= COLLINEAR_TOLERANCE * scale)
        if deficient.size == 0:
            break
        first = int(deficient[0])
        if first < n_protected:
            raise SingularSystemError(
                f"Linear regressors are collinear (column indices {deficient[deficient < n_protected].tolist()})",
                n_offending=int(np.sum(deficient < n_protected)),
                columns=deficient[deficient < n_protected].tolist(),
            )
        collinear.append(kept.pop(first - n_protected))

    if zero or collinear:
        logger.warning(f"Pruned {len(zero)} zero and {len(collinear)} collinear sieve features")
    return PruneReport(kept=kept, zero=zero, collinear=sorted(collinear))


# ── SANN ─────────────────────────────────────────────────────────────────────

def _columns(data: pd.DataFrame, columns: Sequence[str]) -> np.ndarray:
    missing = [c for c in columns if c not in data.columns]
    if missing:
        raise KeyError(f"Data is missing columns: {missing}")
    return ensure_finite(data.loc[:, list(columns)].to_numpy(dtype=np.float64), ",".join(columns))


def _sieve_design(fit: SannFit, data: pd.DataFrame):
    spec = fit.spec
    Z = _columns(data, spec.nonparam_columns)
    X = _columns(data, spec.linear_columns)
    G = hidden_features(fit.sieve, Z)[:, fit.kept_features]
    return Z, X, G


def fit_sann(spec: PlmSpec, data: pd.DataFrame) -> SannFit:
    """Two-step SANN estimator of the partially linear model"""
    X = _columns(data, spec.linear_columns)
    Z = _columns(data, spec.nonparam_columns)
    y = _columns(data, [spec.target]).ravel()
    overlap = spec.overlap
    if overlap:
        logger.warning(f"Columns {overlap} enter both the linear and the nonparametric part")

    trained = train(spec.arch, spec.train, data, spec.target)

    G_full = hidden_features(trained.params, Z)
    report = prune_features(G_full, protected=X)
    G = G_full[:, report.kept]
    if X.shape[0] <= X.shape[1] + G.shape[1]:
        raise SingularSystemError(
            f"{X.shape[0]} rows cannot identify {X.shape[1]} linear and {G.shape[1]} sieve coefficients",
            n_offending=X.shape[1] + G.shape[1] - X.shape[0] + 1,
        )

    X_tilde = partial_out(X, G)
    y_tilde = partial_out(y, G)
    beta = ols_solve(X_tilde, y_tilde)
    std_errors = hc0_std_errors(X_tilde, y_tilde - X_tilde @ beta)

    # Output layer re-solved by OLS given beta; pruned units get weight 0
    output = np.zeros_like(trained.params.output_weights)
    output[report.kept] = ols_solve(G, y - X @ beta)
    sieve = replace(trained.params, output_weights=output, linear_weights=beta.copy())
    fitted = forward_batch(sieve, Z, X)

    logger.info(f"SANN fit on {y.size} rows: beta={np.round(beta, 4).tolist()}, "
                f"{len(report.kept)} of {G_full.shape[1]} features kept")
    return SannFit(
        spec=spec,
        beta_hat=beta,
        std_errors=std_errors,
        sieve=sieve,
        fitted_values=fitted,
        residuals=y - fitted,
        prune_report=report,
        overlap_warning=bool(overlap),
        train_summary=trained.summary(),
    )


def beta_std_errors(fit: SannFit, data: pd.DataFrame) -> np.ndarray:
    """HC0 standard errors of beta on the partialled regression over data"""
    _, X, G = _sieve_design(fit, data)
    y = _columns(data, [fit.spec.target]).ravel()
    X_tilde = partial_out(X, G)
    y_tilde = partial_out(y, G)
    return hc0_std_errors(X_tilde, y_tilde - X_tilde @ fit.beta_hat)


def predict(fit: SannFit, newdata: pd.DataFrame) -> np.ndarray:
    """x'beta + sieve(z) evaluated with the stored input standardization"""
    X = _columns(newdata, fit.spec.linear_columns)
    Z = _columns(newdata, fit.spec.nonparam_columns)
    return forward_batch(fit.sieve, Z, X)


def fit_report(fit: SannFit, include_params: bool = False) -> Dict:
    report = {
        "model": "sann",
        "linear_columns": list(fit.spec.linear_columns),
        "nonparam_columns": list(fit.spec.nonparam_columns),
        "beta_hat": fit.beta_hat.tolist(),
        "std_errors": fit.std_errors.tolist(),
        "kept_features": fit.kept_features,
        "pruned_zero": fit.prune_report.zero,
        "pruned_collinear": fit.prune_report.collinear,
        "overlap_warning": fit.overlap_warning,
        "train": fit.train_summary,
        "n_obs": int(fit.fitted_values.size),
        "residual_mse": float(np.mean(fit.residuals ** 2)),
    }
    if include_params:
        report["sieve_params"] = params_to_dict(fit.sieve)
    return report


# ── Benchmarks ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class LinearFit:
    columns: Tuple[str, ...]
    target: str
    intercept: bool
    coef: np.ndarray
    std_errors: np.ndarray
    robust_std_errors: np.ndarray
    fitted_values: np.ndarray
    residuals: np.ndarray

    def coefficients(self) -> Dict[str, float]:
        names = (("const",) if self.intercept else ()) + self.columns
        return dict(zip(names, self.coef.tolist()))

    def design(self, data: pd.DataFrame) -> np.ndarray:
        X = _columns(data, self.columns)
        if self.intercept:
            X = np.hstack([np.ones((X.shape[0], 1)), X])
        return X

    def predict(self, newdata: pd.DataFrame) -> np.ndarray:
        return self.design(newdata) @ self.coef


def fit_linear(data: pd.DataFrame, columns: Sequence[str], target: str = "y",
               intercept: bool = True) -> LinearFit:
    """OLS with classical and HC0 standard errors"""
    columns = tuple(columns)
    X = _columns(data, columns)
    if intercept:
        X = np.hstack([np.ones((X.shape[0], 1)), X])
    y = _columns(data, [target]).ravel()
    coef = ols_solve(X, y)
    resid = y - X @ coef
    return LinearFit(
        columns=columns, target=target, intercept=intercept, coef=coef,
        std_errors=classical_std_errors(X, resid, X.shape[0] - X.shape[1]),
        robust_std_errors=hc0_std_errors(X, resid),
        fitted_values=X @ coef, residuals=resid,
    )


@dataclass(frozen=True)
class KernelPlmFit:
    linear_columns: Tuple[str, ...]
    nonparam_columns: Tuple[str, ...]
    target: str
    beta_hat: np.ndarray
    std_errors: np.ndarray
    bandwidths: np.ndarray
    train_z: np.ndarray
    partial_residuals: np.ndarray

    def predict(self, newdata: pd.DataFrame) -> np.ndarray:
        X = _columns(newdata, self.linear_columns)
        Z = _columns(newdata, self.nonparam_columns)
        nonparam = local_linear_predict(self.train_z, self.partial_residuals, Z, self.bandwidths)
        return X @ self.beta_hat + nonparam

    def nonparametric_part(self, Z) -> np.ndarray:
        return local_linear_predict(self.train_z, self.partial_residuals, Z, self.bandwidths)


def fit_kernel_plm(data: pd.DataFrame, linear: Sequence[str], nonparam: Sequence[str],
                   target: str = "y", kernel_spec: Optional[KernelSpec] = None) -> KernelPlmFit:
    """Robinson-style kernel partially linear model

    The local-linear smoother estimates E[y|z] and E[x|z]; beta comes from the
    regression of the smoothing residuals; phi is the smooth of y - x'beta.
    """
    kernel_spec = kernel_spec or KernelSpec()
    X = _columns(data, linear)
    Z = _columns(data, nonparam)
    y = _columns(data, [target]).ravel()
    h = resolve_bandwidths(kernel_spec, Z)

    smoothed = local_linear_predict(Z, np.column_stack([y, X]), Z, h)
    y_tilde = y - smoothed[:, 0]
    X_tilde = X - smoothed[:, 1:]
    beta = ols_solve(X_tilde, y_tilde)
    std_errors = hc0_std_errors(X_tilde, y_tilde - X_tilde @ beta)
    logger.info(f"Kernel PLM fit on {y.size} rows: beta={np.round(beta, 4).tolist()}")
    return KernelPlmFit(
        linear_columns=tuple(linear), nonparam_columns=tuple(nonparam), target=target,
        beta_hat=beta, std_errors=std_errors, bandwidths=h, train_z=Z,
        partial_residuals=y - X @ beta,
    )
