"""Command-line front end.

Two subcommands::

    rlingua run  --task reach --arm rlingua --seeds 0,1,2,3 --steps 50000 --out DIR
    rlingua plot --out curves.svg metrics_seed0.csv metrics_seed1.csv ...

``run`` accepts a config file plus flag and ``--override key=value``
refinements; the fully merged configuration is written into the output
directory.  The default output root comes from ``RLINGUA_OUT`` (falling back
to ``./runs``).  Exit codes: 0 success, 2 configuration error, 3 run failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import (ConfigError, ExperimentConfig, apply_overrides,
                     load_config)
from .experiment import RunFailure, run_experiment
from .plotting import render_curves

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUN = 3

OUT_ROOT_ENV = "RLINGUA_OUT"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rlingua",
        description="Train and evaluate controller-guided TD3 on the "
                    "kinematic manipulation tasks.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment arm over its seeds")
    run.add_argument("--config", metavar="PATH", help="configuration file")
    run.add_argument("--task", metavar="ID", help="task id (e.g. reach, push)")
    run.add_argument("--arm", metavar="NAME",
                     help="rlingua, td3, or controller")
    run.add_argument("--seeds", metavar="LIST",
                     help="comma-separated seed list, e.g. 0,1,2,3")
    run.add_argument("--steps", metavar="N", type=int,
                     help="total environment steps per seed")
    run.add_argument("--out", metavar="DIR", help="output directory")
    run.add_argument("--override", metavar="KEY=VALUE", action="append",
                     default=[], help="set any config key; repeatable")

    plot = sub.add_parser("plot", help="render success curves from metrics files")
    plot.add_argument("metrics", nargs="+", metavar="CSV",
                      help="metrics files produced by `rlingua run`")
    plot.add_argument("--out", metavar="FILE", required=True,
                      help="output SVG path")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    flags = []
    if args.task is not None:
        flags.append(f"run.task={args.task}")
    if args.arm is not None:
        flags.append(f"run.arm={args.arm}")
    if args.seeds is not None:
        flags.append(f"run.seeds={args.seeds}")
    if args.steps is not None:
        flags.append(f"run.total_steps={args.steps}")
    cfg = apply_overrides(cfg, flags + list(args.override))
    cfg.validate()
    return cfg


def _default_out_dir(cfg: ExperimentConfig) -> str:
    root = os.environ.get(OUT_ROOT_ENV, "runs")
    return os.path.join(root, f"{cfg.task}_{cfg.arm}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        try:
            cfg = _config_from_args(args)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        out_dir = args.out or _default_out_dir(cfg)
        try:
            summary = run_experiment(cfg, out_dir)
        except RunFailure as exc:
            print(f"run failed: {exc}", file=sys.stderr)
            return EXIT_RUN
        print(f"wrote {out_dir}")
        for seed, entry in summary["per_seed"].items():
            fields = " ".join(f"{k}={v}" for k, v in entry.items())
            print(f"seed {seed}: {fields}")
        return EXIT_OK
    if args.command == "plot":
        try:
            render_curves(args.metrics, args.out)
        except RunFailure as exc:
            print(f"plot failed: {exc}", file=sys.stderr)
            return EXIT_RUN
        print(f"wrote {args.out}")
        return EXIT_OK
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
