#!/usr/bin/env python3
"""Run the acceptance suite and write a JSON report.

    python3 scripts/run_acceptance.py [--only 1,4,7] [--report acceptance.json]
"""
import argparse
import json
import sys

from rmtlab.acceptance import run_all


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--report", default="acceptance.json")
    a = p.parse_args()
    only = [int(x) for x in a.only.split(",")] if a.only else None
    results = run_all(only)
    with open(a.report, "w") as fh:
        json.dump([{"number": r.number, "title": r.title, "passed": r.passed, "seconds": r.seconds,
                    "budget": r.budget, "metrics": r.metrics} for r in results],
                  fh, indent=2, default=float)
    return 0 if all(r.passed for r in results) else 3


if __name__ == "__main__":
    sys.exit(main())
