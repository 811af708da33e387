"""Scenario execution, invariant checking, and metrics emission."""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from pathlib import Path

from ..errors import (
    CorruptLog,
    IoFailure,
    KernelError,
    PolicyPreconditionViolation,
)
from ..events import parse_log_lines
from ..kernel import Kernel, KernelConfig
from ..tasks import STATES
from .policies import RandomEconomy
from .scenario import PolicyBlock, Scenario, ScriptAction


@dataclass
class SimReport:
    scenario: str
    seed: int
    mode: str
    rounds: list[dict]
    final: dict

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "seed": self.seed, "mode": self.mode,
                "rounds": self.rounds, "final": self.final}

    @staticmethod
    def from_dict(raw: dict) -> "SimReport":
        return SimReport(raw["scenario"], raw["seed"], raw["mode"],
                         raw["rounds"], raw["final"])


def _round_row(kernel: Kernel, round_no: int) -> dict:
    states = {state: 0 for state in STATES}
    for task in kernel.taskflow.tasks.values():
        states[task.state] += 1
    skills = sorted(
        aid for aid, a in kernel.assets.assets.items()
        if a.status == "admitted" and a.kind == "skill")
    top = kernel.assets.score_capability(skills, kernel.config.score_weights)[:3] \
        if skills else []
    return {
        "round": round_no,
        "tasks_by_state": states,
        "assets_admitted": len(kernel.assets.admitted_ids()),
        "reuse_paid_total": sum(s.total_paid for s in kernel.ledger.reuse.values()),
        "balances": {
            pid: {"free": acc.free, "locked": kernel.ledger.locked_of(pid)}
            for pid, acc in sorted(kernel.ledger.accounts.items())
        },
        "top_skills": [[aid, score] for aid, score in top],
        "skill_invocations": {
            aid: kernel.assets.assets[aid].metrics.invocation_count for aid in skills},
        "reuse_paid_by_skill": {
            skill: state.total_paid
            for skill, state in sorted(kernel.ledger.reuse.items())},
    }


def run_scenario(scenario: Scenario, seed_override: int | None = None,
                 mode: str = "fee") -> tuple[SimReport, Kernel]:
    """Drive the kernel through a scenario; returns the report and kernel.

    The kernel's event log (`kernel.log`) is the full run record.
    """
    seed = scenario.seed if seed_override is None else seed_override
    rng = random.Random(seed)
    kernel = Kernel(KernelConfig(mode=mode))
    expected_errors = []

    for participant in scenario.participants:
        kernel.apply({"type": "open_account", "participant": participant["id"],
                      "kind": participant["kind"],
                      "endowment": participant["endowment"]}, participant["id"])

    rows: list[dict] = []
    round_no = 0
    for item in scenario.script:
        if isinstance(item, ScriptAction):
            try:
                kernel.apply(item.command, item.actor)
            except KernelError as exc:
                if item.expect_error is None or exc.code != item.expect_error:
                    raise PolicyPreconditionViolation(
                        f"script action {item.command.get('type')!r} by {item.actor} "
                        f"failed with {exc.code}: {exc}") from exc
                expected_errors.append({"command": item.command.get("type"),
                                        "actor": item.actor, "code": exc.code})
            else:
                if item.expect_error is not None:
                    raise PolicyPreconditionViolation(
                        f"script action {item.command.get('type')!r} by {item.actor} "
                        f"was expected to fail with {item.expect_error}")
        elif isinstance(item, PolicyBlock):
            policy = RandomEconomy(kernel, rng, item)
            for _ in range(item.rounds):
                round_no += 1
                policy.run_round(round_no)
                rows.append(_round_row(kernel, round_no))
    if not rows:
        rows.append(_round_row(kernel, 0))

    totals = kernel.ledger.conservation_totals()
    report = SimReport(
        scenario=scenario.name,
        seed=seed,
        mode=mode,
        rounds=rows,
        final={
            "events": len(kernel.log.events),
            "state_digest": kernel.state_digest(),
            "conservation": totals,
            "expected_errors": expected_errors,
        },
    )
    return report, kernel


# -- invariant checking ------------------------------------------------------


def _fold_entries(entry_records: list[dict]) -> tuple[dict, int, int, str | None]:
    """Independently re-fold the logged ledger entries into balances.

    Returns (balances, endowments, minted, first_violation). `hold`
    entries are earmarks and move nothing. Any transfer that overdraws a
    container is reported instead of applied.
    """
    balances: dict[str, int] = {}
    endowments = 0
    minted = 0
    for record in entry_records:
        entry = record["entry"]
        kind, debit, credit = entry["kind"], entry["debit"], entry["credit"]
        amount = entry["amount"]
        if not isinstance(amount, int) or amount < 0:
            return balances, endowments, minted, \
                f"entry {entry['seq']}: bad amount {amount!r}"
        if kind == "hold":
            continue
        if debit == "mint":
            if kind == "endowment":
                endowments += amount
            else:
                minted += amount
        else:
            balances[debit] = balances.get(debit, 0) - amount
            if balances[debit] < 0:
                return balances, endowments, minted, \
                    f"entry {entry['seq']}: {debit} overdrawn by {kind}"
        balances[credit] = balances.get(credit, 0) + amount
    return balances, endowments, minted, None


def check_properties(lines, mode: str = "fee") -> list[dict]:
    """Evaluate the economy invariants over a recorded log.

    Raises CorruptLog when the log cannot be parsed or replayed; returns
    one verdict per property otherwise.
    """
    events, entry_records = parse_log_lines(lines)
    results = []

    def add(name: str, passed: bool, detail: str = ""):
        results.append({"property": name, "passed": passed, "detail": detail})

    # Replay through a fresh kernel, tracking |K| after every event.
    kernel = Kernel(KernelConfig(mode=mode))
    admitted_series = []
    for event in events:
        try:
            applied, _ = kernel.apply(event.command, event.actor)
        except KernelError as exc:
            raise CorruptLog(f"event {event.seq} does not replay: {exc.code}") from None
        if applied.seq != event.seq:
            raise CorruptLog(f"event {event.seq} replayed out of order")
        admitted_series.append(len(kernel.assets.admitted_ids()))

    # Conservation, audited two ways: the replayed state's totals and an
    # independent fold of the logged entry records.
    totals = kernel.ledger.conservation_totals()
    balances, endowments, minted, violation = _fold_entries(entry_records)
    fold_total = sum(balances.values())
    problems = []
    if violation:
        problems.append(violation)
    if not totals["conserved"]:
        problems.append(f"state total {totals['total']} != "
                        f"endowments {totals['endowments']} + minted {totals['minted']}")
    if fold_total != endowments + minted:
        problems.append(f"entry fold total {fold_total} != {endowments + minted}")
    replayed_entries = [e.to_dict() for e in kernel.ledger.entries]
    logged_entries = [r["entry"] for r in entry_records]
    if replayed_entries != logged_entries:
        problems.append("logged ledger entries do not match replay")
    for pid, account in kernel.ledger.accounts.items():
        if balances.get(pid, 0) != account.free:
            problems.append(f"fold balance for {pid} is {balances.get(pid, 0)}, "
                            f"state says {account.free}")
            break
    add("conservation", not problems, "; ".join(problems))

    negatives = [pid for pid, acc in kernel.ledger.accounts.items() if acc.free < 0]
    negatives += [e.escrow_id for e in kernel.ledger.escrows.values()
                  if e.balance < 0 or e.held < 0]
    add("no_negatives", not negatives, ", ".join(negatives))

    over_budget = []
    for task in kernel.taskflow.tasks.values():
        if kernel.taskflow.active_child_bounty(task) > task.bounty:
            over_budget.append(task.task_id)
    add("budget_bound", not over_budget, ", ".join(over_budget))

    try:
        kernel.assets.topological_order()
        add("acyclic_asset_graph", True)
    except ValueError as exc:
        add("acyclic_asset_graph", False, str(exc))

    monotone = all(a <= b for a, b in zip(admitted_series, admitted_series[1:]))
    add("asset_set_monotone", monotone)

    mismatches = []
    for skill, state in kernel.ledger.reuse.items():
        asset = kernel.assets.assets.get(skill)
        if asset is None:
            mismatches.append(f"{skill}: unknown skill with reuse state")
            continue
        expected = sum(asset.reward_schedule.fee_for(j)
                       for j in range(1, state.paid_count + 1))
        paid_entries = sum(e.amount for e in kernel.ledger.entries
                           if e.kind == "reuse_fee" and e.skill == skill)
        if expected != state.total_paid or paid_entries != state.total_paid:
            mismatches.append(
                f"{skill}: schedule sum {expected}, state {state.total_paid}, "
                f"entries {paid_entries}")
    add("reuse_sum", not mismatches, "; ".join(mismatches))

    double_closed = []
    closings: dict[str, int] = {}
    for entry in kernel.ledger.entries:
        if entry.kind in ("settle", "refund", "release"):
            closings[entry.debit] = closings.get(entry.debit, 0) + 1
    for escrow_id, count in closings.items():
        if count > 1:
            double_closed.append(escrow_id)
    for escrow in kernel.ledger.escrows.values():
        if escrow.status != "open" and closings.get(escrow.escrow_id, 0) != 1:
            double_closed.append(escrow.escrow_id)
    add("escrow_linearity", not double_closed, ", ".join(double_closed))

    broken_metrics = [
        aid for aid, a in kernel.assets.assets.items()
        if a.metrics.invocation_count != a.metrics.success_count + a.metrics.failure_count]
    add("metric_consistency", not broken_metrics, ", ".join(broken_metrics))

    return results


# -- metrics emission ---------------------------------------------------------

CSV_COLUMNS = ["round", "published", "claimed", "in_review", "accepted", "rejected",
               "finally_rejected", "cancelled", "assets_admitted", "reuse_paid_total",
               "top_skill", "top_skill_score"]

STATE_COLUMNS = {
    "published": "Published", "claimed": "Claimed", "in_review": "InReview",
    "accepted": "Accepted", "rejected": "Rejected",
    "finally_rejected": "FinallyRejected", "cancelled": "Cancelled",
}


def emit_metrics(report: SimReport, fmt: str, out_path: str | Path) -> Path:
    """Write the per-round series; csv columns are fixed and documented."""
    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            out_path.write_text(
                json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
                encoding="utf-8")
            return out_path
        if fmt != "csv":
            raise IoFailure(f"unknown metrics format {fmt!r}")
        participants = sorted(report.rounds[0]["balances"]) if report.rounds else []
        columns = CSV_COLUMNS + [f"free_{p}" for p in participants] \
            + [f"locked_{p}" for p in participants]
        with out_path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(columns)
            for row in report.rounds:
                top = row["top_skills"][0] if row["top_skills"] else ["", ""]
                record = [row["round"]]
                record += [row["tasks_by_state"][STATE_COLUMNS[c]]
                           for c in CSV_COLUMNS[1:8]]
                record += [row["assets_admitted"], row["reuse_paid_total"],
                           top[0], top[1]]
                record += [row["balances"][p]["free"] for p in participants]
                record += [row["balances"][p]["locked"] for p in participants]
                writer.writerow(record)
        return out_path
    except OSError as exc:
        raise IoFailure(f"cannot write {out_path}: {exc}") from None
