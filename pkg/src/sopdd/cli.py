"""
Command line entry point.

    sopdd run INSTANCE.sop [--algorithm pnb] [--width 64] [--time-limit 3600] ...
    sopdd run --random 12 --density 0.2 --seed 7 ...
    sopdd compare DIR [--widths 64 256] [--algorithms bnb pnb] ...
    sopdd generate N --density 0.2 --seed 7 [-o FILE]

Exit status: 0 success, 1 usage error, 2 unreadable or malformed input,
3 failure while solving.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

from . import harness
from .filtering import ALL_RULES, FilterConfig
from .instance import SopFormatError, format_tsplib_sop, load_sop, random_instance
from .search import SolverConfig

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; we reserve 2 for input errors
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _width(text):
    if text.lower() in ("inf", "none", "unbounded"):
        return math.inf
    w = int(text)
    if w < 1:
        raise argparse.ArgumentTypeError("width must be >= 1")
    return w


def _cap(text):
    cap = int(text)
    if cap < 0:
        raise argparse.ArgumentTypeError("memory cap must be >= 0")
    return cap


def _rules(text):
    rules = [r.strip().upper() for r in text.split(",") if r.strip()]
    if text.strip().lower() == "none":
        return frozenset()
    if text.strip().lower() == "all":
        return ALL_RULES
    bad = set(rules) - ALL_RULES
    if bad:
        raise argparse.ArgumentTypeError(f"unknown rules {sorted(bad)}; choose from {sorted(ALL_RULES)}")
    return frozenset(rules)


def _add_solver_flags(p):
    p.add_argument("--time-limit", type=float, default=3600.0, help="seconds (default 3600)")
    p.add_argument("--node-select", choices=("last-exact", "frontier"), default="last-exact")
    p.add_argument("--filter-rules", type=_rules, default=ALL_RULES,
                   help="comma list of R1..R5, 'all' or 'none'")
    p.add_argument("--rrb", choices=("on", "off"), default="on")
    p.add_argument("--memory-cap", type=_cap, default=None,
                   help="max open diagrams kept by peel-and-bound")
    p.add_argument("--out-dir", default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="sopdd", description="Decision-diagram solvers for the sequence ordering problem")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    run = sub.add_parser("run", help="solve one instance")
    run.add_argument("instance", nargs="?", help="TSPLIB .sop file")
    run.add_argument("--random", type=int, metavar="N", help="solve a random instance with N elements")
    run.add_argument("--density", type=float, default=0.2)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--algorithm", choices=("bnb", "pnb"), default="pnb")
    run.add_argument("--width", type=_width, default=64)
    _add_solver_flags(run)

    cmp = sub.add_parser("compare", help="run two algorithms over a directory of .sop files")
    cmp.add_argument("directory")
    cmp.add_argument("--widths", type=_width, nargs="+", default=[64, 256])
    cmp.add_argument("--algorithms", nargs=2, choices=("bnb", "pnb"), default=["bnb", "pnb"],
                     metavar=("BASELINE", "CHALLENGER"))
    _add_solver_flags(cmp)

    gen = sub.add_parser("generate", help="write a random instance in TSPLIB format")
    gen.add_argument("n", type=int)
    gen.add_argument("--density", type=float, default=0.2)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--max-cost", type=int, default=100)
    gen.add_argument("--fixed-endpoints", action="store_true")
    gen.add_argument("-o", "--output", default=None)
    return parser


def _config(args):
    return SolverConfig(
        filter=FilterConfig(rules=args.filter_rules, rrb_enabled=args.rrb == "on"),
        node_select=args.node_select,
        memory_cap=args.memory_cap,
    )


def _cmd_run(args):
    if (args.instance is None) == (args.random is None):
        raise UsageError("sopdd run: give either an instance file or --random N")
    if args.random is not None:
        if args.random < 1:
            raise UsageError("sopdd run: --random needs N >= 1")
        inst = random_instance(args.random, args.density, seed=args.seed)
    else:
        inst = load_sop(args.instance)
    try:
        rec = harness.run_instance(inst, args.algorithm, args.width, args.time_limit,
                                   _config(args), args.out_dir)
    except OSError:
        raise
    except Exception as exc:
        raise RuntimeError(f"{type(exc).__name__}: {exc}") from exc
    sys.stdout.write(harness.summary_text(rec))
    return EXIT_OK


def _cmd_compare(args):
    def progress(rec):
        state = rec.error or ("closed" if rec.closed else "open")
        print(f"{rec.instance:>12} {rec.algorithm} w={harness._width_tag(rec.width)}: {state}",
              file=sys.stderr)

    if not os.path.isdir(args.directory):
        raise OSError(f"not a directory: {args.directory}")
    cmp = harness.run_comparison(args.directory, args.widths, tuple(args.algorithms),
                                 args.time_limit, _config(args), args.out_dir, progress)
    for width in args.widths:
        print(f"\nwidth {harness._width_tag(width)}")
        print(harness.format_table(harness.comparison_rows(cmp, width)))
    print()
    print(harness.format_table(harness.summary_rows(cmp)))
    return EXIT_OK


def _cmd_generate(args):
    if args.n < 1:
        raise UsageError("sopdd generate: n must be >= 1")
    inst = random_instance(args.n, args.density, seed=args.seed, max_cost=args.max_cost,
                           fixed_endpoints=args.fixed_endpoints)
    text = format_tsplib_sop(inst)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        if getattr(args, "verbose", False):
            logging.basicConfig(level=logging.DEBUG)
        handler = {"run": _cmd_run, "compare": _cmd_compare, "generate": _cmd_generate}[args.command]
        return handler(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (OSError, SopFormatError) as exc:
        print(f"sopdd: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (RuntimeError, ValueError) as exc:
        print(f"sopdd: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
