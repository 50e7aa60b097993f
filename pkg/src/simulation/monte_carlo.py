"""
Monte Carlo - Replication driver for the simulation studies

Every replication draws a fresh sample from its own stream (spawned from the master
seed), fits the estimator menu on the training part, scores the test part and
evaluates the fit on the design's grid. Replications run through joblib; the result
does not depend on the worker count.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from simulation.dgp import GRID_POINTS, DgpSpec, Design, design_for, generate, train_test_split
from simulation.estimators import EstimatorSpec, fit_estimator
from simulation.metrics import (
    BiasVarianceCurves, bias_variance_curves, integrated_metrics, mspe, summarize,
)
from utils.errors import ConfigError, SieveVarError
from utils.numerics import RngStream

logger = logging.getLogger(__name__)

REPLICATION_COLUMNS = ["replication", "estimator", "status", "rmspe", "mspe", "mse_truth", "error"]


@dataclass
class McResult:
    dgp: DgpSpec
    estimators: List[str]
    B: int
    replications: pd.DataFrame
    grid: Optional[np.ndarray] = None
    curves: Dict[str, BiasVarianceCurves] = field(default_factory=dict)
    integrated: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def ok(self, estimator: str) -> pd.DataFrame:
        rows = self.replications
        return rows[(rows["estimator"] == estimator) & (rows["status"] == "ok")]

    def mean_metric(self, estimator: str, column: str = "rmspe") -> float:
        return summarize(self.ok(estimator)[column])["mean"]

    def summary(self) -> Dict:
        """Per-estimator aggregates over successful replications"""
        out: Dict[str, Dict] = {}
        skip = {"replication", "estimator", "status", "error"}
        for tag in self.estimators:
            ok = self.ok(tag)
            entry: Dict = {
                "n_ok": int(len(ok)),
                "n_failed": int((self.replications["estimator"] == tag).sum() - len(ok)),
            }
            for column in self.replications.columns:
                if column in skip:
                    continue
                values = ok[column].dropna()
                if len(values):
                    entry[column] = summarize(values)
            if tag in self.integrated:
                entry.update(self.integrated[tag])
            out[tag] = entry
        return {"dgp": self.dgp.to_dict(), "B": self.B, "estimators": out}

    def curves_frame(self) -> pd.DataFrame:
        """Long table: estimator, grid, truth, mean_prediction, bias2, var_e, mse"""
        frames = []
        for tag, curves in self.curves.items():
            frame = pd.DataFrame({"estimator": tag, "grid": self.grid, **curves.as_dict()})
            frames.append(frame)
        columns = ["estimator", "grid", "truth", "mean_prediction", "bias2", "var_e", "mse"]
        if not frames:
            return pd.DataFrame(columns=columns)
        return pd.concat(frames, ignore_index=True)[columns]


def _replicate(spec: DgpSpec, design: Design, estimators: Sequence[EstimatorSpec],
               stream: RngStream, b: int, split: float, grid: Optional[pd.DataFrame]):
    """One replication; returns metric rows and grid predictions per estimator tag"""
    frame = generate(spec, stream)
    train_frame, test_frame = train_test_split(frame, design, split)
    rows, grid_predictions = [], {}
    for est in estimators:
        row = {"replication": b, "estimator": est.tag, "status": "ok", "error": ""}
        try:
            fitted = fit_estimator(est, design, train_frame, seed=stream.child_seed())
            y_hat = fitted.predict(test_frame)
            row["mspe"] = mspe(test_frame[design.target], y_hat)
            row["rmspe"] = float(np.sqrt(row["mspe"]))
            row["mse_truth"] = mspe(test_frame[design.truth], y_hat)
            for name, value in (fitted.coefficients or {}).items():
                row[f"beta_{name}"] = value
            for name, value in (fitted.std_errors or {}).items():
                row[f"se_{name}"] = value
            row.update(fitted.diagnostics)
            if grid is not None:
                grid_predictions[est.tag] = np.asarray(fitted.predict(grid), dtype=np.float64)
        except (SieveVarError, ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
            row["status"] = "failed"
            row["error"] = f"{type(e).__name__}: {e}"
            logger.warning(f"Replication {b}, estimator {est.tag} failed: {row['error']}")
        rows.append(row)
    logger.debug(f"Replication {b} done (stream {stream.label})")
    return rows, grid_predictions


def resolve_estimators(estimators: Sequence[Union[str, Dict, EstimatorSpec]]) -> List[EstimatorSpec]:
    resolved = [e if isinstance(e, EstimatorSpec) else EstimatorSpec.from_config(e) for e in estimators]
    tags = [e.tag for e in resolved]
    if len(set(tags)) != len(tags):
        raise ConfigError(f"Estimator labels must be unique, got {tags}")
    if not resolved:
        raise ConfigError("The estimator menu is empty")
    return resolved


def run_mc(spec: DgpSpec, estimators: Sequence[Union[str, Dict, EstimatorSpec]], B: int,
           split: float = 0.8, holdout: Optional[int] = None, n_jobs: int = 1,
           grid_points: int = GRID_POINTS) -> McResult:
    """B replications of the estimator menu on fresh draws from spec

    holdout overrides the design's last-N test window (Model 1/2 use 250).
    """
    if B < 2:
        raise ConfigError(f"Need at least 2 replications, got B={B}")
    menu = resolve_estimators(estimators)
    design = design_for(spec)
    if holdout is not None:
        design = replace(design, holdout=int(holdout))
    grid = design.grid(grid_points)
    streams = RngStream(spec.seed).spawn(B)

    logger.info(f"Monte Carlo: {spec.kind} n={spec.n}, B={B}, estimators={[e.tag for e in menu]}")
    outputs = Parallel(n_jobs=n_jobs)(
        delayed(_replicate)(spec, design, menu, streams[b], b, split, grid) for b in range(B)
    )

    rows = [row for replication_rows, _ in outputs for row in replication_rows]
    table = pd.DataFrame(rows)
    extra = sorted(c for c in table.columns if c not in REPLICATION_COLUMNS)
    table = table.reindex(columns=REPLICATION_COLUMNS + extra)

    result = McResult(spec, [e.tag for e in menu], B, table)
    if grid is not None:
        result.grid = grid[design.grid_column].to_numpy()
        truth = design.truth_fn(grid)
        for tag in result.estimators:
            preds = [gp[tag] for _, gp in outputs if tag in gp]
            if len(preds) < 2:
                logger.warning(f"Estimator {tag}: fewer than 2 successful replications, no curves")
                continue
            curves = bias_variance_curves(np.vstack(preds), truth)
            result.curves[tag] = curves
            result.integrated[tag] = integrated_metrics(result.grid, curves)

    failed = int((table["status"] != "ok").sum())
    if failed:
        logger.warning(f"{failed} estimator fits failed and were excluded")
    means = {tag: round(result.mean_metric(tag), 4) for tag in result.estimators}
    logger.info(f"Monte Carlo finished: mean RMSPE {means}")
    return result


@dataclass
class DecompositionResult:
    orders: List[int]
    grid: np.ndarray
    curves: Dict[int, BiasVarianceCurves]
    integrated: pd.DataFrame

    def curves_frame(self) -> pd.DataFrame:
        frames = [pd.DataFrame({"order": r, "grid": self.grid, **c.as_dict()})
                  for r, c in self.curves.items()]
        return pd.concat(frames, ignore_index=True)


def decompose_mse(spec: DgpSpec, orders: Sequence[int], B: int,
                  base: Optional[EstimatorSpec] = None, split: float = 0.8,
                  n_jobs: int = 1) -> DecompositionResult:
    """Pointwise and integrated bias^2 / variance of the ANN sieve per sieve order

    Also reports the mean estimated variance term n^-1 trace(E^-1 Omega) per order.
    """
    base = base or EstimatorSpec("ann")
    if base.name != "ann":
        raise ConfigError("The sieve-order sweep needs an 'ann' base estimator")
    if not orders:
        raise ConfigError("The sieve-order sweep is empty")
    if design_for(spec).grid_column is None:
        raise ConfigError(f"DGP '{spec.kind}' has no evaluation grid for a decomposition")

    curves, rows, grid = {}, [], None
    for r in orders:
        est = replace(base, label=f"ann_{r}", hidden_sizes=(int(r),))
        mc = run_mc(spec, [est], B, split=split, n_jobs=n_jobs)
        if est.tag not in mc.curves:
            logger.warning(f"Sieve order {r}: no curves (too many failed replications)")
            continue
        grid = mc.grid
        curves[int(r)] = mc.curves[est.tag]
        ok = mc.ok(est.tag)
        sieve_var = ok["sieve_variance"].mean() if "sieve_variance" in ok else float("nan")
        rows.append({"order": int(r), **mc.integrated[est.tag],
                     "sieve_variance_term": float(sieve_var),
                     "mean_rmspe": mc.mean_metric(est.tag),
                     "n_ok": int(len(ok))})
    columns = ["order", "integrated_bias2", "integrated_var_e", "integrated_mse",
               "sieve_variance_term", "mean_rmspe", "n_ok"]
    return DecompositionResult(list(curves), grid, curves, pd.DataFrame(rows, columns=columns))
