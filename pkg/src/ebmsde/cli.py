"""Command-line interface: one experiment per invocation.

Exit codes: 0 run passed, 1 an acceptance check failed, 2 config error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import sys

from .config import KINDS, ParseError, ValidationError, load_config
from .experiments import run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebmsde",
        description="Stochastic Budyko-Sellers energy balance experiments",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="override the parallelism degree")
        p.add_argument("--no-figures", action="store_true",
                       help="skip PNG rendering, write only CSV/JSON")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = load_config(args.config)
        if rc.experiment["kind"] != args.kind:
            raise ValidationError(
                "experiment.kind",
                f"config declares {rc.experiment['kind']!r}, "
                f"subcommand is {args.kind!r}",
            )
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ValidationError("seed", "must fit in 64 bits")
            rc.seed = args.seed
            rc.raw["seed"] = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ValidationError("threads", "must be at least 1")
            rc.threads = args.threads
        out_dir = args.out if args.out is not None else rc.output_dir
    except (ParseError, ValidationError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        result = run_experiment(rc, out_dir=out_dir,
                                figures=not args.no_figures)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - map to the documented exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3

    for name, ok in result.summary["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(f"wrote {len(result.files)} files to {out_dir}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
