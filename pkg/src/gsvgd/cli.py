"""Command-line interface: run experiments, self-check, report the version."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsvgd",
        description="Particle inference benchmarks with projected Stein updates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the experiment described by a config file")
    run_p.add_argument("--config", required=True, help="path to a key = value config file")
    run_p.add_argument("--out", default=None, help="output directory (overrides the config)")
    run_p.add_argument("--seed", type=int, default=None, help="base seed (overrides the config)")

    sub.add_parser("check", help="run the invariant/oracle self-check suite")
    sub.add_parser("version", help="print the package version")
    return parser


def _cmd_run(args) -> int:
    from .config import ConfigError, parse_config, with_overrides
    from .harness import run_experiment

    path = Path(args.config)
    try:
        text = path.read_text()
    except OSError as exc:
        print(f"error: cannot read config file {path}: {exc}", file=sys.stderr)
        return 2
    try:
        config = with_overrides(parse_config(text), seed=args.seed, out_dir=args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    outcome = run_experiment(config)
    for rep, message in sorted(outcome.diverged.items()):
        print(f"rep {rep} diverged: {message}", file=sys.stderr)
    for file in outcome.files:
        print(file)
    print(f"completed {len(outcome.records)}/{config.repetitions} repetitions "
          f"in {outcome.wall_time:.1f} s -> {outcome.out_dir}")
    return 1 if outcome.all_diverged else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return 0
    if args.command == "check":
        from .checks import run_checks

        return 0 if run_checks() else 1
    return _cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
