"""
Pointer-State Toolkit - command line

    python pointer_cli.py trajectory --config zz.json --out results/zz
    python pointer_cli.py sweep --config sweep.json --workers 4
    python pointer_cli.py analyze-cycle --config e1.json --seed 3

Exit codes: 0 success, 2 configuration error, 3 numeric-regime error.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv

from backend.quantum.errors import ConfigInvalid, NumericRegimeError, PointerStateError
from backend.runner.experiment_runner import run_experiment
from backend.runner.logging_setup import configure_logging
from config.experiment_config import KINDS, load_experiment

log = logging.getLogger("cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointer_cli",
        description="Seeded pointer-state experiments: trajectories, sweeps, ensembles, ESR cycles, cycle analysis",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sub = subparsers.add_parser(kind, help=f"run a '{kind}' experiment document")
        sub.add_argument("--config", required=True, help="path to the JSON experiment document")
        sub.add_argument("--out", default=None, help="output directory (overrides the document)")
        sub.add_argument("--seed", type=int, default=None, help="seed override (replaces every seed in the document)")
        sub.add_argument("--workers", type=int, default=None, help="worker processes for seeds / grid points")
        sub.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging("DEBUG" if args.verbose else None)

    try:
        config = load_experiment(args.config)
        if config.kind != args.command:
            raise ConfigInvalid("kind", f"document is a '{config.kind}' experiment, not '{args.command}'")
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigInvalid("seed", "must be an unsigned 64-bit integer")
            config = config.with_seed(args.seed)
        if args.workers is not None and args.workers < 1:
            raise ConfigInvalid("workers", "must be at least 1")

        summary = run_experiment(config, out_dir=args.out, workers=args.workers)

    except ConfigInvalid as e:
        log.error(f"Config error: {e}")
        return EXIT_CONFIG
    except NumericRegimeError as e:
        log.error(f"Numeric regime error: {e}")
        return EXIT_NUMERIC
    except PointerStateError as e:
        log.error(f"{type(e).__name__}: {e}")
        return EXIT_CONFIG

    for path in summary['files']:
        print(path)
    if 'fit' in summary:
        print(json.dumps(summary['fit'], sort_keys=True))
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
