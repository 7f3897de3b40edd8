"""Command line entry point.

    hawkchain <experiment> --config <path> [--out <dir>] [--overwrite]
              [--seed <u64>] [--threads <n>]

Exit status: 0 on success, 2 for configuration problems, 3 when a numerical
step fails.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import EXPERIMENTS, load_config
from .exceptions import ConfigError, DimensionMismatch, InvalidParameter, NumericalFailure
from .experiments import run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("hawkchain")


def _u64(s: str) -> int:
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hawkchain", description="Lattice black-hole simulations.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="INI run configuration")
    p.add_argument("--out", help="output directory (overrides [run] output)")
    p.add_argument("--overwrite", action="store_true", help="replace a non-empty output directory")
    p.add_argument("--seed", type=_u64, help="root seed for disorder and fitting")
    p.add_argument("--threads", type=_positive, help="worker threads")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, args.experiment)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.threads is not None:
            cfg = replace(cfg, run=replace(cfg.run, threads=args.threads))
        result = run(cfg, args.out, args.overwrite)
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidParameter, DimensionMismatch) as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for path in result.files:
        log.info("wrote %s", path)
    for k, v in result.results.items():
        print(f"{k} = {v}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
