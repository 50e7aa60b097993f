#!/usr/bin/env python3
"""
sieve_var - ReLU sieve estimation, SANN partially linear models and CAViaR VaR backtests
Command-line entry point
"""

import argparse
import json
import logging
import sys
from logging.handlers import TimedRotatingFileHandler
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from commands import COMMANDS
from utils.config_manager import ConfigManager
from utils.errors import ConfigError, SieveVarError
from utils.report_writer import ReportWriter

_LOG_DIR = Path(__file__).parent.parent / "logs"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

logger = logging.getLogger(__name__)


def setup_logging(level: str = "INFO") -> None:
    """File log rotated at midnight plus a console handler on stderr"""
    _LOG_DIR.mkdir(exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        handlers=[
            TimedRotatingFileHandler(
                _LOG_DIR / "sieve_var.log",
                when="midnight",
                backupCount=7,
                encoding="utf-8",
            ),
            logging.StreamHandler(sys.stderr),
        ],
        format="%(asctime)s %(levelname)-8s %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        force=True,
    )


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting so usage errors get the JSON error format"""

    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sieve_var", description=__doc__.strip().splitlines()[0])
    subparsers = parser.add_subparsers(dest="command", parser_class=_Parser)
    subparsers.required = True
    for name, module in COMMANDS.items():
        sub = subparsers.add_parser(name, help=module.HELP)
        sub.add_argument("--output-dir", dest="output_dir", help="Directory for reports (default: output)")
        sub.add_argument("--seed", type=int, help="Master seed (default 0)")
        sub.add_argument("--config", help="JSON file layered over config/defaults.json")
        sub.add_argument("--set", dest="overrides", action="append", default=[],
                         metavar="KEY=VALUE", help="Dotted-key override, value parsed as JSON")
        sub.add_argument("--log-level", dest="log_level", default="INFO",
                         choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        module.add_arguments(sub)
    return parser


def resolve_config(args: argparse.Namespace, manager: Optional[ConfigManager] = None) -> Dict:
    manager = manager or ConfigManager()
    module = COMMANDS[args.command]
    flags = {"output_dir": args.output_dir, "seed": args.seed}
    flags.update({key: getattr(args, dest) for dest, key in module.FLAG_KEYS.items()})
    config = manager.resolve(args.command, args.config, flags, args.overrides)
    if config.get("preset"):
        preset = manager.get_preset(config["preset"], config.get("cell"))
        config = manager.resolve(args.command, args.config, flags, args.overrides, preset=preset)
    if config.get("seed") is None or int(config["seed"]) < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {config.get('seed')}")
    return config


def _error_payload(error: BaseException, exit_code: int) -> str:
    return json.dumps({"error": type(error).__name__, "message": str(error), "exit_code": exit_code})


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as e:
        print(_error_payload(e, EXIT_USAGE), file=sys.stderr)
        return EXIT_USAGE

    setup_logging(args.log_level)
    try:
        config = resolve_config(args)
        writer = ReportWriter(Path(config["output_dir"]))
        logger.info(f"Running {args.command} with seed {config['seed']}")
        COMMANDS[args.command].run(config, writer)
    except (ConfigError, KeyError) as e:
        logger.error(f"Usage error: {e}")
        print(_error_payload(e, EXIT_USAGE), file=sys.stderr)
        return EXIT_USAGE
    except (SieveVarError, ValueError, ArithmeticError, RuntimeError, OSError,
            np.linalg.LinAlgError) as e:
        logger.exception(f"{args.command} failed")
        print(_error_payload(e, EXIT_RUNTIME), file=sys.stderr)
        return EXIT_RUNTIME

    print(json.dumps({"command": args.command, "output_dir": str(writer.output_dir),
                      "artifacts": writer.artifacts()}))
    logger.info(f"{args.command} finished: {len(writer.artifacts())} artifacts")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
