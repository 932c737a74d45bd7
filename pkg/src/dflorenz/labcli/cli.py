"""Command-line entry point: ``dflorenz <suite> [--config PATH] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import logging
import platform
import sys
import time

import numpy as np
import scipy

from .. import core
from ..errors import ConfigError
from .config import SUITES, load_config
from .report import emit
from .suites import run_experiment

log = logging.getLogger("dflorenz")


def build_parser():
    ap = argparse.ArgumentParser(prog="dflorenz", description="Numerical experiments on the hybrid Lorenz skew product.")
    ap.add_argument("suite", choices=SUITES + ("all",))
    ap.add_argument("--config", metavar="PATH", help="INI file with [section] key = value entries")
    ap.add_argument("--out", metavar="DIR", default="dflorenz-out", help="report directory (default: %(default)s)")
    ap.add_argument("--seed", type=int, help="overrides run.seed")
    ap.add_argument("--jobs", type=int, help="worker processes (overrides run.jobs)")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override one config value; repeatable")
    ap.add_argument("-q", "--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.jobs is not None:
        overrides.append(f"run.jobs={args.jobs}")
    try:
        cfg = load_config(args.config, overrides)
        t0 = time.perf_counter()
        rep = run_experiment(cfg, args.suite)
    except ConfigError as e:
        print(f"dflorenz: config error [{e.key}]: {e}", file=sys.stderr)
        return 2
    rep.run_meta = {
        "suite": args.suite,
        "wall_time_s": time.perf_counter() - t0,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "kernel": core.BACKEND,
    }
    try:
        paths = emit(rep, args.out)
    except OSError as e:
        print(f"dflorenz: {e}", file=sys.stderr)
        return 3
    for c in rep.checks:
        log.info("%-4s %-48s %-10s %s", "PASS" if c.passed else "FAIL", c.name, c.anchor, c.value)
    for e in rep.errors:
        log.warning("error in %s/%s: %s", e["suite"], e["item"], e["error"])
    log.info("wrote %d files to %s", len(paths), args.out)
    return 0 if rep.passed and not rep.errors else 1


if __name__ == "__main__":
    sys.exit(main())
