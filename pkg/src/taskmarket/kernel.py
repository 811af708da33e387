"""Command kernel: the single mutation path for the whole marketplace.

Every state change enters through `apply` as a tagged command, is
validated against module preconditions, executed, and appended to the
event log together with the ledger entries it produced. Rejected
commands mutate nothing and append nothing. Replaying a log through a
fresh kernel with the same configuration reproduces the state digest
bit for bit; the kernel itself contains no randomness and no wall-clock
reads (time is the event counter).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .assets import AssetRegistry, ScoreWeights, table_executor
from .errors import (
    CorruptLog,
    InsufficientCredits,
    KernelError,
    MalformedCommand,
    NotClaimant,
    NotParticipant,
    TaskNotAccepted,
    TaskNotClaimed,
    UnknownAssetId,
    UnknownParticipant,
)
from .events import Event, EventLog, parse_log_lines
from .ledger import Ledger
from .tasks import ACCEPTED, CLAIMED, IN_REVIEW, TaskFlow


@dataclass
class KernelConfig:
    mode: str = "fee"  # fee: invokers pay reuse rewards; mint: the platform creates them
    score_weights: ScoreWeights = field(default_factory=ScoreWeights)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "score_weights": vars(self.score_weights)}


def canonical_json(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


class Kernel:
    def __init__(self, config: KernelConfig | None = None,
                 log_path: str | Path | None = None, executor=table_executor):
        self.config = config or KernelConfig()
        self.ledger = Ledger(mode=self.config.mode)
        self.taskflow = TaskFlow(self.ledger)
        self.assets = AssetRegistry(executor=executor)
        self.log = EventLog(log_path)
        self.clock = 0

        self._handlers = {
            "open_account": self._cmd_open_account,
            "publish_task": self._cmd_publish_task,
            "claim_task": self._cmd_claim_task,
            "decompose": self._cmd_decompose,
            "submit_deliverable": self._cmd_submit_deliverable,
            "review": self._cmd_review,
            "cancel_task": self._cmd_cancel_task,
            "propose_assets": self._cmd_propose_assets,
            "validate_asset": self._cmd_validate_asset,
            "admit_assets": self._cmd_admit_assets,
            "record_invocation": self._cmd_record_invocation,
        }

    # -- command application -------------------------------------------------

    def apply(self, command: dict, actor: str) -> tuple[Event, object]:
        if not isinstance(command, dict):
            raise MalformedCommand("command must be an object")
        ctype = command.get("type")
        handler = self._handlers.get(ctype)
        if handler is None:
            raise MalformedCommand(f"unknown command type {ctype!r}")
        if not isinstance(actor, str) or not actor:
            raise MalformedCommand("actor must be a participant id")
        if ctype != "open_account" and actor not in self.ledger.accounts:
            raise UnknownParticipant(actor)

        entries_before = len(self.ledger.entries)
        at = self.clock + 1
        result = handler(command, actor, at)
        # Acceptance implies no handler error: commit the event.
        self.clock = at
        event = Event(seq=len(self.log.events) + 1, at=at, actor=actor, command=command)
        new_entries = [e.to_dict() for e in self.ledger.entries[entries_before:]]
        self.log.append(event, new_entries)
        return event, result

    @staticmethod
    def _need(command: dict, key: str, types, what: str):
        if key not in command:
            raise MalformedCommand(f"command is missing {key!r}")
        value = command[key]
        if types is bool:
            if not isinstance(value, bool):
                raise MalformedCommand(f"{what} must be a boolean")
        elif not isinstance(value, types) or isinstance(value, bool):
            raise MalformedCommand(f"{what} has the wrong type")
        return value

    # -- handlers --------------------------------------------------------------

    def _cmd_open_account(self, command, actor, at):
        participant = self._need(command, "participant", str, "participant")
        if actor != participant:
            raise MalformedCommand("open_account must be issued by the new participant")
        kind = self._need(command, "kind", str, "kind")
        endowment = self._need(command, "endowment", int, "endowment")
        account = self.ledger.open_account(participant, kind, endowment)
        return {"participant": account.participant, "kind": account.kind,
                "free": account.free, "locked": 0}

    def _cmd_publish_task(self, command, actor, at):
        intent = self._need(command, "intent", str, "intent")
        bounty = self._need(command, "bounty", int, "bounty")
        parent = command.get("parent")
        if parent is not None and not isinstance(parent, str):
            raise MalformedCommand("parent must be a task id")
        task_id = command.get("task_id")
        if task_id is not None and not isinstance(task_id, str):
            raise MalformedCommand("task_id must be a string")
        task = self.taskflow.publish_task(actor, intent, bounty, parent, task_id)
        return task.to_dict()

    def _cmd_claim_task(self, command, actor, at):
        task_id = self._need(command, "task", str, "task")
        return self.taskflow.claim_task(task_id, actor).to_dict()

    def _cmd_decompose(self, command, actor, at):
        task_id = self._need(command, "task", str, "task")
        subplans = self._need(command, "subplans", list, "subplans")
        children = self.taskflow.decompose(task_id, actor, subplans)
        return [t.to_dict() for t in children]

    def _cmd_submit_deliverable(self, command, actor, at):
        task_id = self._need(command, "task", str, "task")
        payload = self._need(command, "payload", str, "payload")
        used = command.get("used_skills", [])
        consulted = command.get("consulted", [])
        evidence = command.get("evidence", [])
        if not isinstance(used, list) or not isinstance(consulted, list) \
                or not isinstance(evidence, list):
            raise MalformedCommand("used_skills, consulted, and evidence must be lists")
        for skill_id in used:
            asset = self.assets.assets.get(skill_id)
            if asset is None or asset.status != "admitted" or asset.kind != "skill":
                raise UnknownAssetId(f"{skill_id} is not an admitted skill")
        for asset_id in consulted:
            asset = self.assets.assets.get(asset_id)
            if asset is None or asset.status != "admitted":
                raise UnknownAssetId(f"{asset_id} is not an admitted asset")
        task = self.taskflow.submit_deliverable(task_id, actor, payload, used, consulted, evidence)
        return task.to_dict()

    def _cmd_review(self, command, actor, at):
        task_id = self._need(command, "task", str, "task")
        verdict = self._need(command, "verdict", str, "verdict")
        feedback = command.get("feedback", "")
        if not isinstance(feedback, str):
            raise MalformedCommand("feedback must be a string")
        final = command.get("final", False)
        if not isinstance(final, bool):
            raise MalformedCommand("final must be a boolean")
        task, settled = self.taskflow.review(task_id, actor, verdict, feedback, final, at)
        if task.state == ACCEPTED:
            for skill_id in task.used_skills:
                self.assets.record_acceptance(skill_id)
        return {"task": task.to_dict(), "settled": settled}

    def _cmd_cancel_task(self, command, actor, at):
        task_id = self._need(command, "task", str, "task")
        return self.taskflow.cancel_task(task_id, actor).to_dict()

    def _cmd_propose_assets(self, command, actor, at):
        task_id = self._need(command, "task", str, "task")
        items = self._need(command, "items", list, "items")
        task = self.taskflow.task(task_id)
        if task.state != ACCEPTED:
            raise TaskNotAccepted(f"{task_id} is {task.state}")
        members = self.taskflow.participants_of(task_id)
        if actor not in members:
            raise NotParticipant(f"{actor} did not work on {task_id}")
        created = self.assets.propose(task_id, actor, items)
        return [a.to_dict() for a in created]

    def _cmd_validate_asset(self, command, actor, at):
        asset_id = self._need(command, "asset", str, "asset")
        validators = command.get("validators", [])
        if not isinstance(validators, list):
            raise MalformedCommand("validators must be a list")
        return self.assets.validate(asset_id, validators).to_dict()

    def _cmd_admit_assets(self, command, actor, at):
        task_id = self._need(command, "task", str, "task")
        self.taskflow.task(task_id)  # referential integrity
        admitted = self.assets.admit(task_id)
        return [a.to_dict() for a in admitted]

    def _cmd_record_invocation(self, command, actor, at):
        skill_id = self._need(command, "skill", str, "skill")
        task_id = self._need(command, "task", str, "task")
        success = self._need(command, "success", bool, "success")
        latency_ms = self._need(command, "latency_ms", int, "latency_ms")
        task = self.taskflow.task(task_id)
        if task.state not in (CLAIMED, IN_REVIEW):
            raise TaskNotClaimed(f"{task_id} is {task.state}")
        if actor != task.claimant:
            raise NotClaimant(f"{actor} is not executing {task_id}")
        skill = self.assets.admitted_skill(skill_id)
        metrics = self.assets.record_invocation(skill_id, success, latency_ms)
        fee, paid = 0, False
        if success and skill.creator != task.claimant:
            try:
                fee = self.ledger.accrue_reuse_reward(
                    skill_id, skill.creator, task.claimant, skill.reward_schedule, task=task_id)
                paid = True
            except InsufficientCredits:
                self.ledger.note_unpaid_reuse(skill_id)
        return {"metrics": metrics.to_dict(), "fee": fee, "paid": paid}

    # -- queries ---------------------------------------------------------------

    def list_tasks(self, state: str | None = None) -> list[dict]:
        tasks = self.taskflow.tasks.values()
        if state is not None:
            tasks = [t for t in tasks if t.state == state]
        return [t.to_dict() for t in tasks]

    def balance_report(self) -> dict:
        return self.ledger.balance_report()

    def account_view(self, participant: str) -> dict:
        account = self.ledger.account(participant)
        return {
            "participant": participant,
            "kind": account.kind,
            "free": account.free,
            "locked": self.ledger.locked_of(participant),
            "entries": [e.to_dict() for e in self.ledger.entries
                        if e.debit == participant or e.credit == participant],
        }

    # -- state identity ----------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "clock": self.clock,
            "event_seq": len(self.log.events),
            "ledger": self.ledger.to_dict(),
            "taskflow": self.taskflow.to_dict(),
            "assets": self.assets.to_dict(),
        }

    def state_digest(self) -> str:
        return hashlib.sha256(canonical_json(self.state_dict()).encode("utf-8")).hexdigest()

    def snapshot(self) -> dict:
        state = self.state_dict()
        return {
            "as_of_seq": len(self.log.events),
            "digest": hashlib.sha256(canonical_json(state).encode("utf-8")).hexdigest(),
            "state": state,
        }

    # -- replay ------------------------------------------------------------

    @classmethod
    def replay(cls, lines, config: KernelConfig | None = None,
               executor=table_executor) -> "Kernel":
        """Rebuild a kernel from log lines; raises CorruptLog on any defect."""
        events, _ = parse_log_lines(lines)
        return cls.replay_events(events, config, executor)

    @classmethod
    def replay_events(cls, events, config: KernelConfig | None = None,
                      executor=table_executor) -> "Kernel":
        kernel = cls(config=config, executor=executor)
        for event in events:
            try:
                applied, _ = kernel.apply(event.command, event.actor)
            except KernelError as exc:
                raise CorruptLog(
                    f"event {event.seq} does not replay: {exc.code}: {exc}") from None
            if applied.seq != event.seq or applied.at != event.at:
                raise CorruptLog(
                    f"event {event.seq} replayed with seq {applied.seq}, at {applied.at}")
        return kernel
