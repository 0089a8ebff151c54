"""Command-line entry point.

Exit codes: 0 when the run shows what it should (the chain reaches its
contradiction, an ablation finds a witness, ...), 1 when a scientific check
fails, 2 for usage errors and unreadable protocol files.
"""
from __future__ import annotations

import argparse
import math
import sys
from typing import Sequence

from . import sampling
from .checker import InternalInconsistencyError, ablate, enumerate_stories, forward_chain
from .protocol import R_VALUES, VIEWS, ProtocolError, load_protocol, view_distribution
from .report import (
    check_document,
    distributions_document,
    halting_document,
    outcome_label,
    render,
    trace_document,
    trajectory_document,
)
from .stories import ABLATABLE, TheoryRuleSet
from ._kernels import BACKENDS

MAX_TOLERANCE = 1e-6


class UsageError(Exception):
    pass


def _tolerance(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if not 0 < v <= MAX_TOLERANCE:
        raise argparse.ArgumentTypeError(f"tolerance must lie in (0, {MAX_TOLERANCE:g}]")
    return v


def _positive(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    common.add_argument("--tolerance", type=_tolerance, default=1e-9, help="numerical tolerance, in (0, 1e-6]")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--protocol", metavar="FILE", help="JSON protocol document (default: canonical protocol)")

    parser = argparse.ArgumentParser(prog="ewfe", description="Extended Wigner's Friend toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="sample round records")
    p.add_argument("--trials", type=_positive, default=1000)
    p.add_argument("--max-rounds", type=_positive, default=sampling.DEFAULT_MAX_ROUNDS)
    p.add_argument("--view", choices=VIEWS, default="W", help="reference view (default W)")
    p.add_argument("--workers", type=_positive, default=1)

    p = sub.add_parser("distributions", parents=[common], help="exact outcome probabilities")
    p.add_argument("--view", choices=VIEWS + ("all",), default="all")
    p.add_argument("--r", choices=R_VALUES, help="condition F1/F2 on the coin value")

    p = sub.add_parser("check", parents=[common], help="replay the deduction")
    p.add_argument("--drop", action="append", choices=TheoryRuleSet.names(), default=[])

    p = sub.add_parser("enumerate", parents=[common], help="search bounded canonical stories")
    p.add_argument("--max-rounds", type=_positive, default=3)
    p.add_argument("--drop", action="append", choices=ABLATABLE, default=[])
    p.add_argument("--backend", choices=sorted(BACKENDS))

    p = sub.add_parser("ablate", parents=[common], help="drop assumptions one at a time")
    p.add_argument("--drop", action="append", choices=ABLATABLE, default=[], help="default: all of them")
    p.add_argument("--max-rounds", type=_positive, default=2)
    p.add_argument("--backend", choices=sorted(BACKENDS))
    return parser


def _simulate(args, spec) -> tuple[dict, int]:
    if args.max_rounds > sampling.MAX_ROUNDS_LIMIT:
        raise UsageError(f"--max-rounds must be at most {sampling.MAX_ROUNDS_LIMIT}")
    if args.view == "W" and args.trials == 1:
        return trajectory_document(sampling.run_trajectory(spec, args.seed, args.max_rounds)), 0
    if args.view == "W":
        stats = sampling.halting_stats(spec, args.trials, args.seed, args.max_rounds, args.workers)
        doc = halting_document(stats)
        # a frequency more than 5σ off the Born weight points at a sampling bug
        bad = stats.total_rounds > 0 and abs(stats.empirical_p - stats.exact_p) > 5 * stats.sigma
        return doc, 1 if bad else 0
    counts = sampling.outcome_counts(spec, args.view, args.trials, args.seed, args.max_rounds)
    total = sum(counts.values())
    exact = view_distribution(spec, args.view)
    doc = {
        "view": args.view,
        "seed": args.seed,
        "trials": args.trials,
        "rounds_per_trajectory": args.max_rounds,
        "counts": {outcome_label(o): c for o, c in counts.items()},
        "frequencies": {outcome_label(o): c / total for o, c in counts.items()},
        "exact": {outcome_label(o): p for o, p in exact.items()},
    }
    return doc, 0


def _distributions(args, spec) -> tuple[dict, int]:
    views = VIEWS if args.view == "all" else (args.view,)
    if args.r and not set(views) & {"F1", "F2"}:
        raise UsageError("--r only applies to views F1 and F2")
    doc = distributions_document(spec, views, args.r)
    bad = any(abs(d["total"] - 1.0) > args.tolerance for d in doc["distributions"])
    return doc, 1 if bad else 0


def _check(args, spec) -> tuple[dict, int]:
    trace = forward_chain(spec, TheoryRuleSet().without(*args.drop))
    expect = not args.drop
    return trace_document(trace), 0 if trace.contradiction == expect else 1


def _enumerate(args, spec) -> tuple[dict, int]:
    rules = TheoryRuleSet().without(*args.drop)
    try:
        report = enumerate_stories(spec, rules, args.max_rounds, args.backend)
    except ValueError as e:
        raise UsageError(str(e)) from None
    ok = report.witnesses_verified and ((report.satisfying == 0) if not args.drop else (report.satisfying > 0))
    return check_document(report), 0 if ok else 1


def _ablate(args, spec) -> tuple[dict, int]:
    dropped = args.drop or list(ABLATABLE)
    try:
        reports = [ablate(spec, d, args.max_rounds, args.backend) for d in dropped]
    except ValueError as e:
        raise UsageError(str(e)) from None
    ok = all(r.satisfying > 0 and r.witnesses_verified for r in reports)
    if len(reports) == 1:
        return check_document(reports[0]), 0 if ok else 1
    return {"ablations": [check_document(r) for r in reports]}, 0 if ok else 1


COMMANDS = {
    "simulate": _simulate,
    "distributions": _distributions,
    "check": _check,
    "enumerate": _enumerate,
    "ablate": _ablate,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        spec = load_protocol(args.protocol, args.tolerance)
        doc, code = COMMANDS[args.command](args, spec)
    except (ProtocolError, UsageError) as e:
        print(f"ewfe: error: {e}", file=sys.stderr)
        return 2
    except InternalInconsistencyError as e:
        print(f"ewfe: internal inconsistency: {e}", file=sys.stderr)
        return 1
    sys.stdout.write(render(doc, args.format))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
