"""Command-line entry point for running and comparing experiment bundles.

Exit codes: 0 success, 2 invalid config or arguments, 3 numerical failure
inside a pipeline, 4 a comparison exceeded its tolerances.
"""

import argparse
import json
import os
import sys

from .errors import InvalidInputError, KafError
from .harness import (
    ENV_OUT_DIR,
    compare_runs,
    emit_tables,
    list_bundled_configs,
    run_experiment,
)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="kaf",
        description="Run, tabulate, and compare kernel forecasting experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment config into a bundle")
    run_p.add_argument(
        "config",
        help="path to a config file, or a bundled name: "
        + ", ".join(list_bundled_configs()),
    )
    run_p.add_argument("--seed", type=int, default=None, help="override config seed")
    run_p.add_argument(
        "--out-dir",
        default=None,
        help=f"bundle parent directory (default ${ENV_OUT_DIR} or ./runs)",
    )
    run_p.add_argument(
        "--threads", type=int, default=None, help="cap BLAS/OpenMP thread pools"
    )
    run_p.add_argument(
        "--fast",
        action="store_true",
        help="apply the config's reduced-size tier (fast_overrides)",
    )

    tab_p = sub.add_parser("tables", help="re-emit the delimited tables of a bundle")
    tab_p.add_argument("bundle")

    cmp_p = sub.add_parser(
        "compare", help="compare two bundles' metrics against tolerances"
    )
    cmp_p.add_argument("bundle_a")
    cmp_p.add_argument("bundle_b")
    cmp_p.add_argument("tolerances", help="JSON tolerance map")
    return parser


def _fail(exc):
    report = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(report, sort_keys=True), file=sys.stderr)
    return 2 if isinstance(exc, InvalidInputError) else 3


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            out_dir = args.out_dir or os.environ.get(ENV_OUT_DIR) or "runs"
            if args.threads is not None:
                import threadpoolctl

                with threadpoolctl.threadpool_limits(args.threads):
                    bundle = run_experiment(
                        args.config, out_dir, seed=args.seed, fast=args.fast
                    )
            else:
                bundle = run_experiment(
                    args.config, out_dir, seed=args.seed, fast=args.fast
                )
            print(bundle)
            return 0
        if args.command == "tables":
            for path in emit_tables(args.bundle):
                print(path)
            return 0
        report = compare_runs(args.bundle_a, args.bundle_b, args.tolerances)
        summary = {k: report[k] for k in ("experiment", "n_checked", "failures", "pass")}
        print(json.dumps(summary, sort_keys=True, indent=2))
        return 0 if report["pass"] else 4
    except KafError as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
