"""Command line for running scenarios, checking logs, and emitting metrics.

    sim run <scenario.json> [--seed N] [--out DIR] [--mode fee|mint]
    sim check <log.jsonl> [--mode fee|mint]
    sim metrics <report.json> --format {csv,json} [--out FILE]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import KernelError
from .runner import SimReport, check_properties, emit_metrics, run_scenario
from .scenario import load_scenario


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    report, kernel = run_scenario(scenario, seed_override=args.seed, mode=args.mode)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / f"{scenario.name}.log.jsonl"
    report_path = out_dir / f"{scenario.name}.report.json"
    log_path.write_text(kernel.log.dump(), encoding="utf-8")
    report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
    totals = report.final["conservation"]
    print(f"scenario {scenario.name} seed {report.seed}: "
          f"{report.final['events']} events, {len(report.rounds)} round rows")
    print(f"  log     -> {log_path}")
    print(f"  report  -> {report_path}")
    print(f"  digest  {report.final['state_digest']}")
    print(f"  conservation {'PASS' if totals['conserved'] else 'FAIL'} "
          f"(total {totals['total']}, endowments {totals['endowments']}, "
          f"minted {totals['minted']})")
    return 0 if totals["conserved"] else 1


def _cmd_check(args) -> int:
    lines = Path(args.log).read_text(encoding="utf-8").splitlines()
    results = check_properties(lines, mode=args.mode)
    failed = 0
    for result in results:
        status = "PASS" if result["passed"] else "FAIL"
        detail = f"  ({result['detail']})" if result["detail"] else ""
        print(f"{status} {result['property']}{detail}")
        failed += 0 if result["passed"] else 1
    return 0 if failed == 0 else 1


def _cmd_metrics(args) -> int:
    raw = json.loads(Path(args.report).read_text(encoding="utf-8"))
    report = SimReport.from_dict(raw)
    out = args.out or f"{Path(args.report).stem}.{args.format}"
    path = emit_metrics(report, args.format, out)
    print(f"metrics ({args.format}) -> {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sim", description="Deterministic marketplace economy simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--out", default="./sim-out", help="output directory")
    p_run.add_argument("--mode", choices=("fee", "mint"), default="fee")
    p_run.set_defaults(func=_cmd_run)

    p_check = sub.add_parser("check", help="replay a log and check invariants")
    p_check.add_argument("log")
    p_check.add_argument("--mode", choices=("fee", "mint"), default="fee")
    p_check.set_defaults(func=_cmd_check)

    p_metrics = sub.add_parser("metrics", help="emit per-round metrics from a report")
    p_metrics.add_argument("report")
    p_metrics.add_argument("--format", choices=("csv", "json"), required=True)
    p_metrics.add_argument("--out", default=None)
    p_metrics.set_defaults(func=_cmd_metrics)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KernelError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
