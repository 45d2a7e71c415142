"""Command-line entry point.

Subcommands ``run``, ``grid-z``, ``bo-z``, ``probe-complexity`` and
``gen-bids`` all read a TOML configuration (``--config``); ``--out`` and
``--seed`` override the output directory and the seed list. Log verbosity
comes from the ``ARTEO_LOG`` environment variable (``WARNING`` by default).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import experiment
from .config import ConfigError, ExperimentConfig, load_config

COMMANDS = {
    "run": "run the configured algorithms over all seeds",
    "grid-z": "grid search over the exploration weight",
    "bo-z": "Bayesian optimization of the exploration weight",
    "probe-complexity": "time runs of increasing horizon",
    "gen-bids": "write synthetic campaign and seed-ad CSV files",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arteo", description="Safe adaptive exploration experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="TOML configuration file (defaults if omitted)")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, metavar="N", help="run only this seed")
    return parser


def _configure_logging() -> None:
    level = os.environ.get("ARTEO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.out:
        updates["output_dir"] = args.out
    if args.seed is not None:
        updates["seeds"] = [args.seed]
    return cfg.model_copy(update=updates) if updates else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging()
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"arteo: config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "run":
            result = experiment.run_experiment(cfg)
            if result.partial:
                print("arteo: some runs stopped early, see summary.txt", file=sys.stderr)
            return result.exit_code
        if args.command == "grid-z":
            best, _, unique = experiment.run_grid_z(cfg)
            print(f"best z: {best:g}{'' if unique else ' (tied)'}")
        elif args.command == "bo-z":
            report = experiment.run_bo_z(cfg)
            print(f"best z: {report.best_z:.6g}")
        elif args.command == "probe-complexity":
            report = experiment.run_complexity(cfg)
            slope = report.slope
            print("slope: " + ("undefined" if slope is None else f"{slope:.4g}"))
        elif args.command == "gen-bids":
            experiment.write_bid_data(cfg)
    except (ValueError, OSError) as exc:
        print(f"arteo: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
