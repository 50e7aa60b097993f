"""
Estimators - The estimator menu compared in the simulation studies

Each entry turns a training frame into a Fitted object with predict(); parametric
entries also report coefficients and standard errors on the design's linear columns.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from models.kernel import KernelSpec, LocalLinearRegressor
from models.plm import PlmSpec, fit_kernel_plm, fit_linear, fit_sann, predict as sann_predict, prune_features
from models.sieve_net import SieveNetArch, TrainConfig, active_units, hidden_features, predict_frame, train
from simulation.dgp import Design
from simulation.metrics import sieve_variance_term
from utils.errors import ConfigError, SingularSystemError

logger = logging.getLogger(__name__)

ESTIMATORS = ("truth", "mean", "linear", "ann", "sann", "kernel", "kernel_plm")


@dataclass(frozen=True)
class EstimatorSpec:
    """One menu entry; label distinguishes variants of the same estimator (e.g. sann_all)"""

    name: str
    label: Optional[str] = None
    hidden_sizes: Tuple[int, ...] = (50,)
    activation: str = "relu"
    clip: Optional[float] = None
    train: TrainConfig = field(default_factory=TrainConfig)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    linear_columns: Optional[Tuple[str, ...]] = None
    nonparam_columns: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if self.name not in ESTIMATORS:
            raise ConfigError(f"Unknown estimator '{self.name}', expected one of {ESTIMATORS}")
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if self.linear_columns is not None:
            object.__setattr__(self, "linear_columns", tuple(self.linear_columns))
        if self.nonparam_columns is not None:
            object.__setattr__(self, "nonparam_columns", tuple(self.nonparam_columns))

    @property
    def tag(self) -> str:
        return self.label or self.name

    @classmethod
    def from_config(cls, entry: Union[str, Dict]) -> "EstimatorSpec":
        if isinstance(entry, str):
            return cls(name=entry)
        data = dict(entry)
        try:
            return cls(
                name=data["name"],
                label=data.get("label"),
                hidden_sizes=tuple(data.get("hidden_sizes", (50,))),
                activation=data.get("activation", "relu"),
                clip=data.get("clip"),
                train=TrainConfig.from_dict(data.get("train")),
                kernel=KernelSpec.from_dict(data.get("kernel")),
                linear_columns=data.get("linear_columns"),
                nonparam_columns=data.get("nonparam_columns"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Invalid estimator entry {entry!r}: {e}") from e


@dataclass
class Fitted:
    tag: str
    predict: Callable[[pd.DataFrame], np.ndarray]
    coefficients: Optional[Dict[str, float]] = None
    std_errors: Optional[Dict[str, float]] = None
    diagnostics: Dict[str, float] = field(default_factory=dict)


def _linear(spec: EstimatorSpec, design: Design) -> Tuple[str, ...]:
    return spec.linear_columns if spec.linear_columns is not None else design.linear


def _nonparam(spec: EstimatorSpec, design: Design) -> Tuple[str, ...]:
    return spec.nonparam_columns if spec.nonparam_columns is not None else design.nonparam


def _fit_ann(spec: EstimatorSpec, design: Design, data: pd.DataFrame, seed: int) -> Fitted:
    columns = spec.nonparam_columns or design.regressors
    arch = SieveNetArch(columns, spec.hidden_sizes, spec.activation, spec.clip)
    result = train(arch, replace(spec.train, seed=seed), data, design.target)
    params = result.params

    diagnostics = {"active_units": float(active_units(params)), "epochs": float(result.epochs_run)}
    G = hidden_features(params, data.loc[:, list(columns)].to_numpy(dtype=np.float64))
    resid = data[design.target].to_numpy() - G @ params.output_weights
    try:
        kept = prune_features(G).kept
        diagnostics["sieve_variance"] = sieve_variance_term(G[:, kept], resid)
    except (SingularSystemError, np.linalg.LinAlgError) as e:
        logger.warning(f"Sieve variance term unavailable: {e}")
    return Fitted(spec.tag, lambda frame: predict_frame(params, frame), diagnostics=diagnostics)


def _fit_sann(spec: EstimatorSpec, design: Design, data: pd.DataFrame, seed: int) -> Fitted:
    linear = _linear(spec, design)
    if not linear:
        raise ConfigError(f"Estimator '{spec.tag}' needs linear columns; the design has none")
    plm_spec = PlmSpec(linear, _nonparam(spec, design), design.target, spec.hidden_sizes,
                       spec.activation, spec.clip, replace(spec.train, seed=seed))
    fit = fit_sann(plm_spec, data)
    return Fitted(
        spec.tag,
        lambda frame: sann_predict(fit, frame),
        coefficients=dict(zip(linear, fit.beta_hat.tolist())),
        std_errors=dict(zip(linear, fit.std_errors.tolist())),
        diagnostics={"kept_features": float(len(fit.kept_features)),
                     "epochs": float(fit.train_summary["epochs_run"])},
    )


def _fit_linear(spec: EstimatorSpec, design: Design, data: pd.DataFrame) -> Fitted:
    columns = spec.linear_columns or design.regressors
    fit = fit_linear(data, columns, design.target, intercept=True)
    coef = fit.coefficients()
    report = [c for c in design.linear if c in coef]
    se = dict(zip(("const",) + fit.columns, fit.std_errors.tolist()))
    return Fitted(spec.tag, fit.predict,
                  coefficients={c: coef[c] for c in report} or None,
                  std_errors={c: se[c] for c in report} or None)


def _fit_kernel(spec: EstimatorSpec, design: Design, data: pd.DataFrame) -> Fitted:
    columns = list(spec.nonparam_columns or design.regressors)
    model = LocalLinearRegressor(spec.kernel).fit(data.loc[:, columns].to_numpy(dtype=np.float64),
                                                  data[design.target].to_numpy(dtype=np.float64))
    return Fitted(spec.tag, lambda frame: model.predict(frame.loc[:, columns].to_numpy(dtype=np.float64)))


def _fit_kernel_plm(spec: EstimatorSpec, design: Design, data: pd.DataFrame) -> Fitted:
    linear = _linear(spec, design)
    if not linear:
        raise ConfigError(f"Estimator '{spec.tag}' needs linear columns; the design has none")
    fit = fit_kernel_plm(data, linear, _nonparam(spec, design), design.target, spec.kernel)
    return Fitted(spec.tag, fit.predict,
                  coefficients=dict(zip(linear, fit.beta_hat.tolist())),
                  std_errors=dict(zip(linear, fit.std_errors.tolist())))


def fit_estimator(spec: EstimatorSpec, design: Design, data: pd.DataFrame, seed: int = 0) -> Fitted:
    """Fit one menu entry on a training frame; seed drives network initialisation"""
    if spec.name == "truth":
        return Fitted(spec.tag, design.truth_fn)
    if spec.name == "mean":
        level = float(data[design.target].mean())
        return Fitted(spec.tag, lambda frame: np.full(len(frame), level))
    if spec.name == "linear":
        return _fit_linear(spec, design, data)
    if spec.name == "ann":
        return _fit_ann(spec, design, data, seed)
    if spec.name == "sann":
        return _fit_sann(spec, design, data, seed)
    if spec.name == "kernel":
        return _fit_kernel(spec, design, data)
    return _fit_kernel_plm(spec, design, data)
