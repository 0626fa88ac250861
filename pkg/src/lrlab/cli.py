"""``lab``: run one experiment from a JSON config and write its outputs."""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np
import scipy.linalg

from . import config as cfg
from .dynamics import IntegrationError, SizeLimitError
from .experiments import run
from .records import atomic_write_text

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_NUMERIC = 4

log = logging.getLogger("lab")


def _threads(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("LAB_THREADS")
    if env is None:
        return 1
    try:
        count = int(env)
    except ValueError:
        raise cfg.ConfigError(f"LAB_THREADS must be an integer, got {env!r}") from None
    if count < 1:
        raise cfg.ConfigError("LAB_THREADS must be positive")
    return count


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description=__doc__)
    parser.add_argument("experiment", choices=cfg.EXPERIMENTS)
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--threads", type=int, help="worker threads (default: LAB_THREADS or 1)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        conf = cfg.load(args.config)
        if conf["experiment"] != args.experiment:
            raise cfg.ConfigError(
                f"config describes {conf['experiment']!r}, command asked for {args.experiment!r}")
        if args.seed is not None:
            if args.seed < 0:
                raise cfg.ConfigError("seed must be nonnegative")
            conf["seed"] = args.seed
        threads = _threads(args.threads)
        if threads < 1:
            raise cfg.ConfigError("--threads must be positive")
        os.makedirs(args.out, exist_ok=True)
        result = run(conf, threads)
    except cfg.ConfigError as exc:
        print(f"lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, SizeLimitError, np.linalg.LinAlgError, scipy.linalg.LinAlgError,
            FloatingPointError, RuntimeError, ValueError) as exc:
        print(f"lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for name, text in sorted(result.files.items()):
        atomic_write_text(os.path.join(args.out, name), text)
        log.info("wrote %s", name)
    if not result.passed:
        print(f"lab: hypotheses of {args.experiment} not satisfied; outputs written",
              file=sys.stderr)
        return EXIT_HYPOTHESIS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
