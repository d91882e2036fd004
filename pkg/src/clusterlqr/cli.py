"""Command-line entry point.

Subcommands: ``generate`` (build and persist a test system), ``sweep``
(design sweep over cluster counts), ``weights`` (fixed-cluster weight
comparison), ``validate`` (pre-flight diagnostics), ``links`` (link-count
arithmetic).  Exit codes: 0 success, 2 configuration error, 3 numerical
failure, 4 run completed but every synthesized controller was unstable.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys as _sys

from .errors import ArgumentError, ClusterLqrError, ConfigError, NumericalError
from .harness import ExperimentConfig, generate_instance, run_sweep, run_weight_comparison, validate_instance
from .projection import count_links

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_UNSTABLE = 4


def _add_common(parser):
    parser.add_argument("--config", required=True, help="experiment config JSON")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="single seed override")
    parser.add_argument("--kappa", type=int, help="Gramian surrogate rank override")
    parser.add_argument("--r-list", help="comma-separated cluster counts")
    parser.add_argument(
        "--design", action="append", help="design method (repeatable; overrides the config)"
    )
    parser.add_argument("--clusters", type=int, help="single cluster count (shorthand for --r-list)")
    parser.add_argument("--restarts", type=int, help="k-means restarts")
    parser.add_argument("--max-iters", type=int, help="k-means iteration cap")
    parser.add_argument("--init", choices=["kmeanspp", "random"], help="k-means seeding")


def _build_parser():
    parser = argparse.ArgumentParser(prog="clusterlqr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "sweep", "weights", "validate"):
        _add_common(sub.add_parser(name))
    links = sub.add_parser("links", help="two-layer vs full-LQR link counts")
    links.add_argument("n", type=int)
    links.add_argument("r", type=int)
    return parser


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config)
    if args.out:
        config.out_dir = args.out
    if args.seed is not None:
        config.seeds = [args.seed]
    if args.kappa is not None:
        config.kappa = args.kappa
    if args.r_list:
        config.r_list = [int(x) for x in args.r_list.split(",") if x]
    if args.clusters is not None:
        config.r_list = [args.clusters]
    if args.design:
        config.designs = args.design
    for key in ("restarts", "max_iters", "init"):
        value = getattr(args, key)
        if value is not None:
            config.kmeans[key] = value
    return dataclasses.replace(config)  # re-validate after the overrides


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "links":
            counts = count_links(args.n, args.r)
            print(json.dumps(counts))
            return EXIT_OK
        config = _load_config(args)
        if args.command == "generate":
            meta = generate_instance(config)
            print(json.dumps(meta))
            return EXIT_OK
        if args.command == "validate":
            report = validate_instance(config)
            print(json.dumps(report, indent=2, default=str))
            return EXIT_OK
        if args.command == "sweep":
            rows = run_sweep(config)
        else:
            rows = run_weight_comparison(config)
        n_stable = sum(1 for row in rows if row["stable"])
        print(f"{len(rows)} rows, {n_stable} stable")
        if rows and n_stable == 0:
            return EXIT_UNSTABLE
        return EXIT_OK
    except (ConfigError, ArgumentError) as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERICAL
    except ClusterLqrError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
