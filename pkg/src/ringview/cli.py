"""Command line entry points: `ringview run` and `ringview gen`."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import engine as engine_mod
from .config import load_config
from .errors import ConfigError, RingviewError
from .workload import gen_workload


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringview",
        description="Maintain join aggregates under updates and watch the "
                    "models they carry.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a configured workload")
    run_p.add_argument("--config", required=True, help="config JSON path")
    run_p.add_argument("--serve", action="store_true",
                       help="expose snapshots and steering over HTTP")
    run_p.add_argument("--port", type=int, help="HTTP port (with --serve)")
    run_p.add_argument("--oracle", action="store_true",
                       help="recompute from scratch per batch instead of "
                            "propagating deltas")
    run_p.add_argument("--bench", action="store_true",
                       help="time incremental vs recompute and print a report")
    run_p.add_argument("--output", help="write snapshots to this NDJSON file")

    gen_p = sub.add_parser("gen", help="generate a seeded random workload")
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--tuples", type=int, default=1000,
                       help="rows per base relation")
    gen_p.add_argument("--relations", type=int, default=2,
                       help="2 = two-relation join, 3 = triangle, 4+ = star")
    gen_p.add_argument("--delete-frac", type=float, default=0.2,
                       help="fraction of stream lines that delete a live tuple")
    gen_p.add_argument("--out", default="workload", help="output directory")
    gen_p.add_argument("--mode", choices=("count", "covar", "mi"),
                       default="count")
    gen_p.add_argument("--updates", type=int,
                       help="stream length (default: one per base tuple)")
    gen_p.add_argument("--skew", type=float, default=1.0,
                       help="join-key skew exponent; 0 = uniform")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        path = gen_workload(seed=args.seed, out_dir=args.out,
                            tuples=args.tuples, relations=args.relations,
                            delete_frac=args.delete_frac, mode=args.mode,
                            updates=args.updates, skew=args.skew)
        print(path)
        return 0
    except ConfigError as exc:
        print(f"ringview: {exc}", file=sys.stderr)
        return 2
    except RingviewError as exc:
        print(f"ringview: {exc}", file=sys.stderr)
        return 1


def _run(args) -> int:
    cfg = load_config(args.config)
    overrides: dict = {}
    if args.serve:
        overrides["serve"] = True
    if args.port is not None:
        overrides["port"] = args.port
    if args.output:
        overrides["output"] = args.output
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    if args.bench:
        print(json.dumps(engine_mod.bench(cfg), indent=2, sort_keys=True))
        return 0
    if args.serve:
        from .serve import serve_run

        return serve_run(cfg)
    if args.oracle:
        return engine_mod.run_oracle(cfg)
    return engine_mod.run(cfg)


if __name__ == "__main__":
    sys.exit(main())
