"""Command-line driver.

Reads a program file, runs every verify statement through the pipeline, and
reports one line per verify (or a JSON document with --json).  Exit code 0
iff all verifies are equivalent, 1 if any is not, 2 on parse or semantic
errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import Limits
from .frontend import build_env
from .parser import ParseError, parse
from .pipeline import run_verify
from .schema import SemanticError


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="semiq",
        description="Decide semantic equivalence of SQL queries under "
                    "integrity constraints.")
    ap.add_argument("file", help="program file (.cos)")
    ap.add_argument("--timeout", type=float, default=30.0,
                    help="wall-clock budget per verify, seconds (default 30)")
    ap.add_argument("--chase-depth", type=int, default=3,
                    help="foreign-key chase ceiling per term (default 3)")
    ap.add_argument("--trace", metavar="DIR", default=None,
                    help="write one proof trace file per verify into DIR")
    ap.add_argument("--dump-uexp", action="store_true",
                    help="print denotations before normalization")
    ap.add_argument("--dump-spnf", action="store_true",
                    help="print normal forms before canonization")
    ap.add_argument("--refute", action="store_true",
                    help="search for a counterexample database on failure")
    ap.add_argument("--json", action="store_true", dest="as_json",
                    help="machine-readable report on stdout")
    ap.add_argument("--seed", type=int, default=0,
                    help="seed for refutation search (default 0)")
    return ap


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        text = Path(args.file).read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        program = parse(text)
        env = build_env(program)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except SemanticError as exc:
        print(f"semantic error: {exc}", file=sys.stderr)
        return 2

    limits = Limits(timeout_s=args.timeout, chase_depth=args.chase_depth)
    trace_dir = Path(args.trace) if args.trace else None
    if trace_dir:
        trace_dir.mkdir(parents=True, exist_ok=True)

    report = []
    worst = 0
    for i, stmt in enumerate(program.verifies(), start=1):
        name = f"verify{i}"
        try:
            outcome = run_verify(stmt, name, env, limits,
                                 dump_uexp=args.dump_uexp,
                                 dump_spnf=args.dump_spnf,
                                 refute=args.refute, seed=args.seed)
        except SemanticError as exc:
            print(f"semantic error: {exc}", file=sys.stderr)
            return 2
        worst = max(worst, outcome.exit_contribution)
        trace_path = None
        if trace_dir:
            trace_path = trace_dir / f"{name}.trace"
            trace_path.write_text(outcome.trace.render())
        entry = {
            "name": name,
            "status": outcome.status,
            "fragment": outcome.fragment,
            "wall_ms": round(outcome.wall_ms, 3),
            "steps": outcome.steps,
            "trace_path": str(trace_path) if trace_path else None,
            "witness": outcome.witness.dump() if outcome.witness else None,
            "detail": outcome.detail or None,
        }
        report.append(entry)
        if not args.as_json:
            print(f"{name}: {outcome.status} ({outcome.wall_ms:.0f} ms)")
            for key in ("uexp1", "uexp2", "spnf1", "spnf2"):
                if key in outcome.dumps:
                    print(f"  {key}: {outcome.dumps[key]}")
            if outcome.detail:
                print(f"  note: {outcome.detail}")
            if outcome.witness is not None:
                print("  counterexample database:")
                for line in outcome.witness.dump().splitlines():
                    print(f"    {line}")
    if args.as_json:
        print(json.dumps({"verifies": report}, indent=2))
    return worst


if __name__ == "__main__":
    sys.exit(main())
