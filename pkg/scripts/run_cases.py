#!/usr/bin/env python3
"""Replay the two case-study scenarios and emit their logs and metrics.

Usage: python3 scripts/run_cases.py [--out DIR]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from taskmarket.sim import check_properties, emit_metrics, load_scenario, run_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="./sim-out")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    failures = 0
    for name in ("case1", "case2"):
        scenario = load_scenario(SCENARIOS / f"{name}.json")
        report, kernel = run_scenario(scenario)
        log_path = out / f"{scenario.name}.log.jsonl"
        log_path.write_text(kernel.log.dump(), encoding="utf-8")
        emit_metrics(report, "json", out / f"{scenario.name}.report.json")
        emit_metrics(report, "csv", out / f"{scenario.name}.csv")

        print(f"== {scenario.name} (seed {report.seed})")
        for pid, bal in report.rounds[-1]["balances"].items():
            print(f"   {pid}: free {bal['free']}, locked {bal['locked']}")
        print(f"   admitted assets: {report.rounds[-1]['assets_admitted']}")
        for result in check_properties(kernel.log.lines):
            status = "PASS" if result["passed"] else "FAIL"
            print(f"   {status} {result['property']}")
            failures += 0 if result["passed"] else 1
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
