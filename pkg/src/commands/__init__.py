"""
Commands - One module per CLI subcommand

Each module exposes NAME, HELP, FLAG_KEYS (argparse dest -> dotted config key),
add_arguments(parser) and run(config, writer) -> summary dict.
"""

from commands import fit, rates, simulate, var_backtest

COMMANDS = {module.NAME: module for module in (simulate, fit, var_backtest, rates)}
