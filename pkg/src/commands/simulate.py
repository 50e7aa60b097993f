"""
Simulate - Monte Carlo studies and sieve-order bias/variance sweeps
"""

import argparse
import logging
from typing import Dict

from simulation.dgp import DgpSpec
from simulation.estimators import EstimatorSpec
from simulation.monte_carlo import decompose_mse, run_mc
from utils.errors import ConfigError
from utils.report_writer import ReportWriter

logger = logging.getLogger(__name__)

NAME = "simulate"
HELP = "Run a Monte Carlo study or a sieve-order sweep"

FLAG_KEYS = {
    "preset": "preset",
    "cell": "cell",
    "B": "B",
    "split": "split",
    "holdout": "holdout",
    "n_jobs": "n_jobs",
}


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", help="Study preset from config/presets.json")
    parser.add_argument("--cell", help="Cell of a preset that lists cells (e.g. 2x1, model2)")
    parser.add_argument("--B", type=int, help="Number of replications")
    parser.add_argument("--split", type=float, help="Training fraction for i.i.d. designs")
    parser.add_argument("--holdout", type=int, help="Last-N test window")
    parser.add_argument("--n-jobs", dest="n_jobs", type=int, help="joblib workers")


def _dgp(config: Dict) -> DgpSpec:
    data = dict(config.get("dgp") or {})
    data["seed"] = int(config["seed"])
    return DgpSpec.from_dict(data)


def run(config: Dict, writer: ReportWriter) -> Dict:
    spec = _dgp(config)
    B = int(config["B"])
    n_jobs = int(config.get("n_jobs", 1))

    if config.get("orders"):
        base = EstimatorSpec.from_config(config["base"]) if config.get("base") else None
        result = decompose_mse(spec, [int(r) for r in config["orders"]], B, base=base,
                               split=float(config["split"]), n_jobs=n_jobs)
        if not result.curves:
            raise ConfigError("No sieve order produced curves; every replication failed")
        writer.csv("decomposition.csv", result.integrated)
        writer.csv("curves.csv", result.curves_frame())
        summary = {"kind": "decomposition", "dgp": spec.to_dict(), "B": B,
                   "integrated": result.integrated.to_dict(orient="records")}
    else:
        result = run_mc(spec, config["estimators"], B, split=float(config["split"]),
                        holdout=config.get("holdout"), n_jobs=n_jobs,
                        grid_points=int(config.get("grid_points", 201)))
        writer.csv("replications.csv", result.replications)
        if result.curves:
            writer.csv("curves.csv", result.curves_frame())
        summary = {"kind": "monte_carlo", **result.summary()}

    writer.json("summary.json", {"config": config, "summary": summary,
                                 "artifacts": writer.artifacts() + ["summary.json"]})
    return summary
