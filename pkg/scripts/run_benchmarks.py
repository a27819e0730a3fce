#!/usr/bin/env python3
"""Run the bundled benchmark programs and report verdicts and timings."""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from semiq import run_program_text  # noqa: E402

EXPECTED = {
    "index_scan.cos": ["EQUIVALENT"],
    "distinct_selfjoin.cos": ["EQUIVALENT"],
    "starburst_distinct_pullup.cos": ["EQUIVALENT"],
    "union_pushdown.cos": ["EQUIVALENT"],
    "exists_to_join.cos": ["EQUIVALENT"],
    "filter_pushdown.cos": ["EQUIVALENT"],
    "arithmetic_filters.cos": ["NOT_PROVED"],
    "count_subquery.cos": ["NOT_PROVED"],
}


def main() -> int:
    bench_dir = Path(__file__).resolve().parent.parent / "benchmarks"
    failures = 0
    for name in sorted(EXPECTED):
        outcomes = run_program_text((bench_dir / name).read_text())
        got = [o.status for o in outcomes]
        ok = got == EXPECTED[name]
        failures += 0 if ok else 1
        times = ", ".join(f"{o.wall_ms:.0f} ms" for o in outcomes)
        mark = "ok " if ok else "FAIL"
        print(f"[{mark}] {name:32s} {got} ({times})")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
