#!/usr/bin/env python3
"""Sweep seeded random economies and tabulate end-of-run statistics.

Usage: python3 scripts/economy_sweep.py [--seeds N] [--rounds N] [--out FILE]

Writes one CSV row per seed: final asset count, reuse fees paid, task
outcomes, and the conservation check. Useful for eyeballing how reuse
rewards and asset accumulation respond to policy knobs.
"""

import argparse
import csv
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from taskmarket.sim.runner import run_scenario
from taskmarket.sim.scenario import parse_scenario


def scenario_for(seed: int, rounds: int):
    return parse_scenario({
        "schema_version": 1,
        "name": f"sweep-{seed}",
        "seed": seed,
        "participants": [
            {"id": "h1", "kind": "human", "endowment": 150},
            {"id": "a1", "kind": "agent", "endowment": 100},
            {"id": "a2", "kind": "agent", "endowment": 100},
            {"id": "a3", "kind": "agent", "endowment": 50},
        ],
        "script": [{"policy": {"rounds": rounds}}],
    })


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--rounds", type=int, default=60)
    parser.add_argument("--out", default="./sim-out/economy_sweep.csv")
    args = parser.parse_args()

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["seed", "events", "accepted", "finally_rejected", "cancelled",
                         "assets_admitted", "reuse_paid_total", "conserved"])
        for seed in range(args.seeds):
            report, kernel = run_scenario(scenario_for(seed, args.rounds))
            last = report.rounds[-1]
            writer.writerow([
                seed,
                report.final["events"],
                last["tasks_by_state"]["Accepted"],
                last["tasks_by_state"]["FinallyRejected"],
                last["tasks_by_state"]["Cancelled"],
                last["assets_admitted"],
                last["reuse_paid_total"],
                report.final["conservation"]["conserved"],
            ])
            print(f"seed {seed}: {report.final['events']} events, "
                  f"{last['assets_admitted']} assets, "
                  f"{last['reuse_paid_total']} credits in reuse fees")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
