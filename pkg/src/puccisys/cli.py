"""Command line entry point: ``puccisys {evolve,eigen,certify,sweep,selfcheck}``.

Environment overrides (used when the matching flag is absent):
``PUCCISYS_OUT`` for the output directory and ``PUCCISYS_WORKERS`` for the
worker count.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .errors import ConfigError
from .harness.config import load_config, parse_config
from .harness.pipeline import RunError, run


def build_parser():
    parser = argparse.ArgumentParser(prog="puccisys", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in ("evolve", "eigen", "certify", "sweep", "selfcheck"):
        p = sub.add_parser(mode)
        p.add_argument("--config", help="run configuration file (INI syntax)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="worker processes for sweeps")
        p.add_argument("--seed", type=int, help="seed for randomized checks")
        if mode == "selfcheck":
            p.add_argument("--cfl-safety", type=float, default=0.9,
                           help="CFL safety factor used by the checks (>1 is a negative control)")
        else:
            p.set_defaults(cfl_safety=None)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.config:
            cfg = load_config(args.config, mode=args.mode)
        elif args.mode == "selfcheck":
            cfg = parse_config("", mode="selfcheck")
        else:
            raise ConfigError("--config", f"{args.mode} needs a configuration file")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    workers = args.workers or os.environ.get("PUCCISYS_WORKERS")
    if workers:
        cfg.workers = int(workers)
    if args.cfl_safety is not None:
        cfg.selfcheck_cfl_safety = args.cfl_safety
    out = args.out or os.environ.get("PUCCISYS_OUT") or cfg.out or f"runs/{args.mode}"
    try:
        result = run(cfg, out)
    except RunError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if args.mode == "selfcheck":
        sys.stdout.write((result.out_dir / "selfcheck.txt").read_text())
    else:
        print(json.dumps(result.summary, default=str))
    return result.status


if __name__ == "__main__":
    sys.exit(main())
