"""Run the acceptance checks and write a one-line-per-check report.

Usage: python scripts/verify_all.py [--only 1,2,11] [--out results/verify.txt]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from mvcate.harness.checks import run_checks


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--only", default=None, help="comma-separated criterion numbers")
    parser.add_argument("--out", default="results/verify.txt")
    args = parser.parse_args(argv)

    numbers = [int(v) for v in args.only.split(",")] if args.only else None
    results = run_checks(numbers, echo=print)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(r.line() + "\n" for r in results))
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed; report in {out}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
