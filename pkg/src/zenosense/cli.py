"""Command-line front end.

Subcommands zeno | sense | reconstruct | end2end run a validated config and
write artifacts; validate just checks the config. Exit codes: 0 success,
2 validation failure, 3 numerical-accuracy failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import FORMATS, parse_config
from .errors import (
    ConfigValidationError,
    InvalidInputError,
    ZenoSenseError,
)
from .pipeline import run

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

RUN_COMMANDS = ("zeno", "sense", "reconstruct", "end2end")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zenosense",
        description="Stochastic-Zeno survival simulation and dynamical-decoupling noise spectroscopy",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command in RUN_COMMANDS + ("validate",):
        p = sub.add_parser(command)
        p.add_argument("--config", required=True, help="path to the YAML experiment config")
        if command != "validate":
            p.add_argument("--seed", type=int, default=None, help="override master_seed")
            p.add_argument("--workers", type=int, default=1, help="worker processes (wall time only)")
            p.add_argument("--out", default=None, help="override output directory")
            p.add_argument("--format", default=None, help="comma-separated subset of csv,json")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    try:
        config = parse_config(args.config)
    except ConfigValidationError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    if args.command == "validate":
        print(f"config OK: mode={config.mode} digest={config.digest}")
        return EXIT_OK

    if config.mode != args.command:
        print(
            f"config declares mode={config.mode} but the {args.command} subcommand was invoked",
            file=sys.stderr,
        )
        return EXIT_VALIDATION

    formats = None
    if args.format is not None:
        formats = tuple(f.strip() for f in args.format.split(",") if f.strip())
        unknown = [f for f in formats if f not in FORMATS]
        if unknown or not formats:
            print(f"--format must be a nonempty subset of {','.join(FORMATS)}", file=sys.stderr)
            return EXIT_VALIDATION
    if args.seed is not None:
        if args.seed < 0:
            print("--seed must be nonnegative", file=sys.stderr)
            return EXIT_VALIDATION
        config = dataclasses.replace(config, master_seed=args.seed)

    try:
        manifest = run(config, workers=args.workers, out_dir=args.out, formats=formats)
    except InvalidInputError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ZenoSenseError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO

    for name, digest in manifest.files:
        print(f"wrote {manifest.output_dir}/{name} sha256={digest[:12]}")
    print(f"manifest: {manifest.output_dir}/manifest.json (seed={manifest.master_seed})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
