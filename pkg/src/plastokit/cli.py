"""Command-line front end.

    plastokit <generate|train|evaluate|ablate|fit-phenom|fem>
              --config FILE [--seed N] [--out DIR] [--jobs K]

``--jobs`` fans independent seeds out to worker processes (multi-seed
experiments only); any module failure exits nonzero with a structured
error report on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import KINDS, load_config
from .errors import PlastokitError
from .experiments import run


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plastokit",
        description="Neural-hardening elastoplasticity experiments")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for multi-seed experiments")
    return parser


def _run_seed(args_tuple):
    config_path, kind, seed, out_dir = args_tuple
    cfg = load_config(config_path, kind=kind)
    return run(cfg, out_dir, seed=seed)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, kind=args.kind)
        if args.jobs > 1 and cfg.kind in ("train", "fit-phenom"):
            import multiprocessing as mp
            seeds = [((args.seed if args.seed is not None else cfg.seed) + j)
                     for j in range(args.jobs)]
            work = [(args.config, args.kind, s, f"{args.out}/seed{s}")
                    for s in seeds]
            with mp.Pool(args.jobs) as pool:
                summaries = pool.map(_run_seed, work)
            print(json.dumps({"seeds": seeds, "summaries": summaries},
                             indent=1, default=str))
        else:
            summary = run(cfg, args.out, seed=args.seed)
            print(json.dumps(summary, indent=1, default=str))
    except PlastokitError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)},
                  sys.stderr, indent=1)
        sys.stderr.write("\n")
        return 1
    except OSError as exc:
        json.dump({"error": "OSError", "message": str(exc)}, sys.stderr,
                  indent=1)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
