"""
Fit - Fit one model to a data file or a generated sample and report it
"""

import argparse
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from models.kernel import KernelSpec
from models.plm import PlmSpec, fit_kernel_plm, fit_linear, fit_report, fit_sann
from models.sieve_net import SieveNetArch, TrainConfig, active_units, params_to_dict, predict_frame, train
from simulation.dgp import Design, DgpSpec, design_for, generate
from utils.errors import ConfigError
from utils.report_writer import ReportWriter

logger = logging.getLogger(__name__)

NAME = "fit"
HELP = "Fit a SANN, ANN, linear or kernel partially linear model"

MODELS = ("sann", "ann", "linear", "kernel_plm")

FLAG_KEYS = {
    "data": "data",
    "model": "model",
    "target": "target",
    "linear": "linear_columns",
    "nonparam": "nonparam_columns",
}


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", help="CSV with one column per variable (default: generate from the dgp)")
    parser.add_argument("--model", choices=MODELS)
    parser.add_argument("--target", help="Response column")
    parser.add_argument("--linear", nargs="+", help="Linear (parametric) columns")
    parser.add_argument("--nonparam", nargs="+", help="Nonparametric columns")


def _load(config: Dict) -> Tuple[pd.DataFrame, Optional[Design]]:
    if config.get("data"):
        path = Path(config["data"])
        if not path.exists():
            raise ConfigError(f"Data file not found: {path}")
        return pd.read_csv(path, float_precision="round_trip"), None
    data = dict(config.get("dgp") or {})
    data["seed"] = int(config["seed"])
    spec = DgpSpec.from_dict(data)
    return generate(spec), design_for(spec)


def _columns(config: Dict, key: str, fallback: Sequence[str]) -> Tuple[str, ...]:
    columns = config.get(key) or fallback
    if not columns:
        raise ConfigError(f"'{key}' must be given when fitting a data file")
    return tuple(columns)


def run(config: Dict, writer: ReportWriter) -> Dict:
    model = config["model"]
    if model not in MODELS:
        raise ConfigError(f"Unknown model '{model}', expected one of {MODELS}")
    frame, design = _load(config)
    target = config.get("target") or "y"
    if target not in frame.columns:
        raise ConfigError(f"Target '{target}' not in data columns {list(frame.columns)}")
    nonparam_default = (design.nonparam or design.regressors) if design else ()
    train_cfg = TrainConfig.from_dict({**(config.get("train") or {}), "seed": int(config["seed"])})
    y = frame[target].to_numpy(dtype=np.float64)

    if model == "sann":
        linear = _columns(config, "linear_columns", design.linear if design else ())
        spec = PlmSpec(linear, _columns(config, "nonparam_columns", nonparam_default), target,
                       tuple(config["hidden_sizes"]), config["activation"], config.get("clip"), train_cfg)
        fit = fit_sann(spec, frame)
        report = fit_report(fit, include_params=bool(config.get("include_params")))
        fitted = fit.fitted_values
    elif model == "ann":
        columns = _columns(config, "nonparam_columns", design.regressors if design else ())
        arch = SieveNetArch(columns, tuple(config["hidden_sizes"]), config["activation"], config.get("clip"))
        result = train(arch, train_cfg, frame, target)
        fitted = predict_frame(result.params, frame)
        report = {"model": "ann", "columns": list(columns), "train": result.summary(),
                  "active_units": active_units(result.params)}
        if config.get("include_params"):
            report["sieve_params"] = params_to_dict(result.params)
    elif model == "linear":
        fit = fit_linear(frame, _columns(config, "linear_columns", design.regressors if design else ()), target)
        fitted = fit.fitted_values
        report = {"model": "linear", "coefficients": fit.coefficients(),
                  "std_errors": dict(zip(("const",) + fit.columns, fit.std_errors.tolist())),
                  "robust_std_errors": dict(zip(("const",) + fit.columns, fit.robust_std_errors.tolist()))}
    else:
        linear = _columns(config, "linear_columns", design.linear if design else ())
        fit = fit_kernel_plm(frame, linear, _columns(config, "nonparam_columns", nonparam_default),
                             target, KernelSpec.from_dict(config.get("kernel")))
        fitted = fit.predict(frame)
        report = {"model": "kernel_plm", "linear_columns": list(linear),
                  "beta_hat": fit.beta_hat.tolist(), "std_errors": fit.std_errors.tolist(),
                  "bandwidths": fit.bandwidths.tolist()}

    report["n_obs"] = int(y.size)
    report["rmse"] = float(np.sqrt(np.mean((y - fitted) ** 2)))
    writer.csv("fitted.csv", pd.DataFrame({"y": y, "fitted": fitted, "residual": y - fitted}))
    writer.json("fit.json", {"config": config, "fit": report,
                             "artifacts": writer.artifacts() + ["fit.json"]})
    logger.info(f"Fitted {model}: RMSE {report['rmse']:.4f}")
    return report
