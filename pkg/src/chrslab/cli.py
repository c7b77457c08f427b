"""Command-line entry point: ``chrslab <experiment> [flags]``."""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (EXPERIMENTS, ExperimentConfig, ReportIOError, SchemaError,
                          run_experiment)
from . import resources
from .resources import DEFAULT_CEILING_BYTES, ResourceGuardError

EXIT_OK, EXIT_USAGE, EXIT_RESOURCE, EXIT_IO = 0, 2, 3, 4


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _describe(param) -> str:
    text = f"{param.help} (default: {param.default!r}"
    if param.rule:
        text += f"; {param.rule}"
    if param.choices:
        text += f"; one of {', '.join(param.choices)}"
    return text + ")"


def build_parser() -> argparse.ArgumentParser:
    lines = ["experiments and their parameters:"]
    for exp in EXPERIMENTS.values():
        flags = " ".join(f"{_flag(p.name)}={p.default!r}" for p in exp.params)
        lines.append(f"  {exp.name}: {exp.summary}\n      {flags}")
    lines.append("\nexit codes: 0 success, 2 usage or schema error, 3 resource guard, 4 I/O error")
    parser = argparse.ArgumentParser(
        prog="chrslab",
        description="Run a simulation experiment and emit a JSON or CSV report.",
        epilog="\n".join(lines),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="experiment", metavar="experiment", required=True)
    for exp in EXPERIMENTS.values():
        sp = sub.add_parser(exp.name, help=exp.summary, description=exp.summary)
        sp.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
        sp.add_argument("--out", default=None, help="report path (default: print JSON to stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json", help="report format (default: json)")
        sp.add_argument("--memory-gib", type=float, default=DEFAULT_CEILING_BYTES / 2**30,
                        help="ceiling for joint-register allocations in GiB (default: 4)")
        for p in exp.params:
            kwargs = {"dest": p.name, "default": None, "help": _describe(p)}
            if p.type is bool:
                sp.add_argument(_flag(p.name), action=argparse.BooleanOptionalAction, **kwargs)
            else:
                sp.add_argument(_flag(p.name), type=p.type, metavar=p.type.__name__.upper(), **kwargs)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    exp = EXPERIMENTS[args.experiment]
    params = {p.name: getattr(args, p.name) for p in exp.params if getattr(args, p.name) is not None}
    config = ExperimentConfig(args.experiment, params, args.seed, args.out, args.format)
    if not args.memory_gib > 0:
        print("chrslab: error: --memory-gib must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        with resources.ceiling(int(args.memory_gib * 2**30)):
            report = run_experiment(config)
    except ResourceGuardError as exc:
        print(f"chrslab: resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (SchemaError, ValueError) as exc:
        print(f"chrslab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ReportIOError, OSError) as exc:
        print(f"chrslab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.out is None:
        json.dump(report.to_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        print(f"wrote {args.out} ({report.duration_s:.1f} s)", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
