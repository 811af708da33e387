"""Seeded random-economy generator driving the kernel through its API.

All randomness lives here, in one `random.Random` stream owned by the
scenario runner; the kernel itself is deterministic. Every phase scans
live kernel state in a stable order and issues only commands whose
preconditions it has just checked, so a kernel rejection indicates a
generator bug and surfaces as PolicyPreconditionViolation.
"""

from __future__ import annotations

import json
import random

from ..errors import KernelError, PolicyPreconditionViolation
from ..kernel import Kernel
from ..tasks import CLAIMED, IN_REVIEW, PUBLISHED, REJECTED, ACCEPTED
from .scenario import PolicyBlock


class RandomEconomy:
    def __init__(self, kernel: Kernel, rng: random.Random, block: PolicyBlock):
        self.kernel = kernel
        self.rng = rng
        self.block = block
        self.invoked: dict[str, list[str]] = {}  # task -> skills invoked so far

    # -- helpers -------------------------------------------------------------

    def _apply(self, command: dict, actor: str):
        try:
            return self.kernel.apply(command, actor)[1]
        except KernelError as exc:
            raise PolicyPreconditionViolation(
                f"{command.get('type')} by {actor}: {exc.code}: {exc}") from exc

    def _participants(self) -> list[str]:
        return sorted(self.kernel.ledger.accounts)

    def _tasks_in(self, state: str):
        return [t for t in self.kernel.taskflow.tasks.values() if t.state == state]

    def _count(self, rate: float) -> int:
        n = int(rate)
        if self.rng.random() < rate - n:
            n += 1
        return n

    def _admitted_skills(self) -> list[str]:
        return sorted(
            aid for aid, a in self.kernel.assets.assets.items()
            if a.status == "admitted" and a.kind == "skill")

    # -- round ---------------------------------------------------------------

    def run_round(self, round_no: int) -> None:
        self._arrivals(round_no)
        self._claims()
        self._decompositions()
        self._invocations()
        self._submissions(round_no)
        self._reviews()
        self._harvest()
        self._cancels()

    def _arrivals(self, round_no: int) -> None:
        participants = self._participants()
        for _ in range(self._count(self.block.task_arrival_rate)):
            funded = [p for p in participants if self.kernel.ledger.accounts[p].free > 0]
            if not funded:
                return
            requester = self.rng.choice(funded)
            free = self.kernel.ledger.accounts[requester].free
            bounty = self.rng.randint(0, min(free, self.block.max_bounty))
            self._apply({"type": "publish_task",
                         "intent": f"generated task (round {round_no})",
                         "bounty": bounty}, requester)

    def _claims(self) -> None:
        participants = self._participants()
        for task in self._tasks_in(PUBLISHED):
            if self.rng.random() >= self.block.claim_probability:
                continue
            solvers = [p for p in participants if p != task.requester]
            if not solvers:
                continue
            self._apply({"type": "claim_task", "task": task.task_id},
                        self.rng.choice(solvers))
        for task in self._tasks_in(REJECTED):
            if self.rng.random() < self.block.claim_probability:
                self._apply({"type": "claim_task", "task": task.task_id}, task.claimant)

    def _decompositions(self) -> None:
        for task in self._tasks_in(CLAIMED):
            if task.plan or task.bounty < 2:
                continue
            if self.rng.random() >= self.block.decomposition_probability:
                continue
            first = self.rng.randint(0, task.bounty // 2)
            second = self.rng.randint(0, task.bounty - first)
            subplans = [
                {"intent": f"part 1 of {task.task_id}", "bounty": first},
                {"intent": f"part 2 of {task.task_id}", "bounty": second},
            ]
            self._apply({"type": "decompose", "task": task.task_id,
                         "subplans": subplans}, task.claimant)

    def _invocations(self) -> None:
        for task in self._tasks_in(CLAIMED):
            skills = self._admitted_skills()
            if not skills:
                return
            for _ in range(self._count(self.block.invocation_rate)):
                if self.rng.random() < self.block.skill_reuse_preference:
                    skill = self.kernel.assets.score_capability(
                        skills, self.kernel.config.score_weights)[0][0]
                else:
                    skill = self.rng.choice(skills)
                success = self.rng.random() < 0.8
                latency = self.rng.randint(50, 1500)
                self._apply({"type": "record_invocation", "skill": skill,
                             "task": task.task_id, "success": success,
                             "latency_ms": latency}, task.claimant)
                if success:
                    self.invoked.setdefault(task.task_id, [])
                    if skill not in self.invoked[task.task_id]:
                        self.invoked[task.task_id].append(skill)

    def _submissions(self, round_no: int) -> None:
        for task in self._tasks_in(CLAIMED):
            if self.rng.random() >= self.block.submit_probability:
                continue
            used = self.invoked.get(task.task_id, [])
            self._apply({
                "type": "submit_deliverable",
                "task": task.task_id,
                "payload": f"deliverable for {task.task_id} in round {round_no}",
                "used_skills": used,
                "consulted": [],
                "evidence": [f"trace:{task.task_id}:{round_no}"],
            }, task.claimant)

    def _reviews(self) -> None:
        for task in self._tasks_in(IN_REVIEW):
            if task.state != IN_REVIEW:  # an earlier review may have cascaded
                continue
            if self.rng.random() < self.block.review_strictness:
                final = self.rng.random() < self.block.final_reject_probability
                self._apply({"type": "review", "task": task.task_id,
                             "verdict": "reject", "feedback": "needs more work",
                             "final": final}, task.requester)
            else:
                self._apply({"type": "review", "task": task.task_id,
                             "verdict": "accept", "feedback": "looks good",
                             "final": False}, task.requester)

    def _harvest(self) -> None:
        """Propose, validate, and admit assets from freshly accepted tasks."""
        harvested = {a.origin_task for a in self.kernel.assets.assets.values()}
        for task in self._tasks_in(ACCEPTED):
            if task.task_id in harvested or task.claimant is None:
                continue
            if self.rng.random() >= self.block.skill_creation_probability:
                continue
            base = len(self.kernel.assets.assets)
            output = f"out-{base}"
            broken = self.rng.random() < self.block.broken_candidate_probability
            behavior = json.dumps({"behavior": {json.dumps("x"): output}})
            items = [{
                "name": f"skill-{base}",
                "kind": "skill",
                "interface": "text -> text",
                "payload": behavior,
                "test_vectors": [{"input": "x",
                                  "output": "WRONG" if broken else output}],
                "reward_schedule": self._schedule(),
            }]
            if self.rng.random() < 0.3:
                items.append({
                    "name": f"trace-{base}",
                    "kind": "trace",
                    "payload": f"execution trace of {task.task_id}",
                })
            admitted = self._admitted_skills()
            if admitted and self.rng.random() < 0.5:
                items[0]["dependencies"] = [{
                    "asset": self.rng.choice(admitted),
                    "relation": self.rng.choice(["depends", "derives", "composes"]),
                }]
            created = self._apply({"type": "propose_assets", "task": task.task_id,
                                   "items": items}, task.claimant)
            for asset in created:
                self._apply({"type": "validate_asset", "asset": asset["asset_id"],
                             "validators": []}, task.claimant)
            self._apply({"type": "admit_assets", "task": task.task_id}, task.claimant)

    def _schedule(self) -> dict:
        if self.rng.random() < 0.7:
            return {"kind": "constant", "alpha": self.rng.randint(0, 3)}
        return {"kind": "decaying", "alpha0": self.rng.choice([2, 4]), "ratio": 0.5}

    def _cancels(self) -> None:
        for task in self._tasks_in(PUBLISHED):
            if task.state != PUBLISHED:
                continue
            if self.rng.random() < self.block.cancel_probability:
                self._apply({"type": "cancel_task", "task": task.task_id}, task.requester)
