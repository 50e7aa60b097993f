"""
Rates - Optimal AMISE convergence rates of the kernel and sieve estimators
"""

import argparse
import logging
import re
from typing import Dict, List, Union

from models.kernel import rates_table
from utils.errors import ConfigError
from utils.report_writer import ReportWriter

logger = logging.getLogger(__name__)

NAME = "rates"
HELP = "Tabulate kernel and sieve AMISE rate exponents per dimension"

FLAG_KEYS = {"kernel_order": "kernel_order", "dims": "dims"}


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kernel-order", dest="kernel_order", type=int, help="Kernel order P")
    parser.add_argument("--dims", help="Dimensions as 'a..b' or a comma list (e.g. 1..15)")


def parse_dims(spec: Union[str, List[int]]) -> List[int]:
    if isinstance(spec, list):
        dims = [int(d) for d in spec]
    else:
        text = str(spec).strip()
        match = re.fullmatch(r"(\d+)\.\.(\d+)", text)
        try:
            if match:
                dims = list(range(int(match.group(1)), int(match.group(2)) + 1))
            else:
                dims = [int(part) for part in text.split(",") if part.strip()]
        except ValueError:
            raise ConfigError(f"Cannot parse dimensions '{spec}'")
    if not dims or min(dims) < 1:
        raise ConfigError(f"Dimensions must be positive integers, got '{spec}'")
    return dims


def run(config: Dict, writer: ReportWriter) -> Dict:
    dims = parse_dims(config["dims"])
    order = int(config["kernel_order"])
    if order < 1:
        raise ConfigError(f"kernel_order must be >= 1, got {order}")
    try:
        table = rates_table(dims, order, config.get("n_grid"))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    writer.csv("rates.csv", table)
    exponents = (table.drop_duplicates("dim")[["dim", "kernel_exponent", "sieve_exponent"]]
                 .to_dict(orient="records"))
    writer.json("summary.json", {"config": config, "exponents": exponents,
                                 "artifacts": writer.artifacts() + ["summary.json"]})
    return {"exponents": exponents}
