"""Task lifecycle: publication, claiming, delegation, review, settlement.

States are the seven canonical strings used on the wire: Published,
Claimed, InReview, Accepted, Rejected, FinallyRejected, Cancelled.

Settlement is two-phase for delegated work. Accepting a subtask while the
root task is still in flight only earmarks (holds) its escrow; the hold
pays out when the root is accepted and unwinds back up the escrow chain
if the root fails. Accepting a subtask after the root was accepted pays
immediately. A failed task tears down its whole subtree: non-terminal
descendants are cancelled and every open descendant escrow refunds into
its parent escrow before the failed task's own escrow refunds.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from . import ledger as ledger_mod
from .errors import (
    BudgetExceeded,
    MalformedCommand,
    NotAuthorizedReviewer,
    NotClaimant,
    NotRequester,
    ParentNotClaimed,
    SelfClaim,
    TaskNotCancellable,
    TaskNotClaimable,
    TaskNotClaimed,
    TaskNotInReview,
    UnknownTask,
)
from .ledger import Ledger, as_credits

PUBLISHED = "Published"
CLAIMED = "Claimed"
IN_REVIEW = "InReview"
ACCEPTED = "Accepted"
REJECTED = "Rejected"
FINALLY_REJECTED = "FinallyRejected"
CANCELLED = "Cancelled"

STATES = (PUBLISHED, CLAIMED, IN_REVIEW, ACCEPTED, REJECTED, FINALLY_REJECTED, CANCELLED)

# Tasks in these states no longer count against the parent budget and can
# never settle; their escrows are already closed.
FAILED_STATES = (FINALLY_REJECTED, CANCELLED)
TERMINAL_STATES = (ACCEPTED, FINALLY_REJECTED, CANCELLED)


def payload_digest(payload: str) -> str:
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class ReviewRecord:
    reviewer: str
    verdict: str  # accept | reject
    feedback: str
    final: bool
    at: int

    def to_dict(self) -> dict:
        return {"reviewer": self.reviewer, "verdict": self.verdict,
                "feedback": self.feedback, "final": self.final, "at": self.at}


@dataclass
class Deliverable:
    deliverable_id: str
    payload_digest: str
    payload_uri: str
    submitted_by: str
    evidence: list[str]

    def to_dict(self) -> dict:
        return {"deliverable_id": self.deliverable_id, "payload_digest": self.payload_digest,
                "payload_uri": self.payload_uri, "submitted_by": self.submitted_by,
                "evidence": list(self.evidence)}


@dataclass
class Task:
    task_id: str
    intent: str
    requester: str
    bounty: int
    state: str = PUBLISHED
    claimant: str | None = None
    parent: str | None = None
    plan: list[str] = field(default_factory=list)
    deliverable: Deliverable | None = None
    review_history: list[ReviewRecord] = field(default_factory=list)
    used_skills: list[str] = field(default_factory=list)
    consulted_assets: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "intent": self.intent,
            "requester": self.requester,
            "bounty": self.bounty,
            "state": self.state,
            "claimant": self.claimant,
            "parent": self.parent,
            "plan": list(self.plan),
            "deliverable": self.deliverable.to_dict() if self.deliverable else None,
            "review_history": [r.to_dict() for r in self.review_history],
            "used_skills": sorted(self.used_skills),
            "consulted_assets": sorted(self.consulted_assets),
        }


class TaskFlow:
    """Task state machine wired to the ledger for escrow movements."""

    def __init__(self, ledger: Ledger):
        self.ledger = ledger
        self.tasks: dict[str, Task] = {}
        self.blobs: dict[str, str] = {}  # payload digest -> payload
        self._task_seq = 0
        self._deliverable_seq = 0

    # -- lookups -----------------------------------------------------------

    def task(self, task_id: str) -> Task:
        try:
            return self.tasks[task_id]
        except KeyError:
            raise UnknownTask(task_id) from None

    def root_of(self, task: Task) -> Task:
        while task.parent is not None:
            task = self.tasks[task.parent]
        return task

    def active_child_bounty(self, task: Task) -> int:
        """Budget already committed to children that can still settle."""
        return sum(self.tasks[c].bounty for c in task.plan
                   if self.tasks[c].state not in FAILED_STATES)

    def subtree(self, task: Task) -> list[Task]:
        """Descendants of `task` in depth-first plan order, task excluded."""
        out: list[Task] = []
        stack = [self.tasks[c] for c in reversed(task.plan)]
        while stack:
            node = stack.pop()
            out.append(node)
            stack.extend(self.tasks[c] for c in reversed(node.plan))
        return out

    # -- lifecycle ---------------------------------------------------------

    def publish_task(self, requester: str, intent: str, bounty: int,
                     parent: str | None = None, task_id: str | None = None) -> Task:
        as_credits(bounty, "bounty")
        if not isinstance(intent, str) or not intent.strip():
            raise MalformedCommand("intent must be a non-empty string")
        self.ledger.account(requester)  # UnknownParticipant if unregistered
        parent_task = None
        if parent is not None:
            parent_task = self.task(parent)
            if parent_task.state != CLAIMED:
                raise ParentNotClaimed(parent)
            if parent_task.claimant != requester:
                raise NotClaimant(f"{requester} is not the claimant of {parent}")
            if self.active_child_bounty(parent_task) + bounty > parent_task.bounty:
                raise BudgetExceeded(
                    f"child bounties would exceed parent bounty {parent_task.bounty}")
        if task_id is None:
            self._task_seq += 1
            task_id = f"t-{self._task_seq}"
        elif task_id in self.tasks:
            raise MalformedCommand(f"task id {task_id!r} already exists")

        if parent_task is not None:
            parent_escrow = self.ledger.escrow_for_task(parent)
            if parent_escrow is not None and parent_escrow.status == ledger_mod.OPEN \
                    and parent_escrow.balance >= bounty:
                escrow_source = ledger_mod.PARENT_ADVANCE
                parent_eid = parent_escrow.escrow_id
            else:
                escrow_source = ledger_mod.PARTICIPANT_FUNDED
                parent_eid = None
            self.ledger.lock_bounty(requester, task_id, bounty, escrow_source, parent_eid)
        else:
            self.ledger.lock_bounty(requester, task_id, bounty, ledger_mod.PARTICIPANT_FUNDED)

        task = Task(task_id, intent, requester, bounty, parent=parent)
        self.tasks[task_id] = task
        if parent_task is not None:
            parent_task.plan.append(task_id)
        return task

    def claim_task(self, task_id: str, solver: str) -> Task:
        task = self.task(task_id)
        self.ledger.account(solver)
        if solver == task.requester:
            raise SelfClaim(f"{solver} requested {task_id}")
        if task.state == PUBLISHED:
            task.state = CLAIMED
            task.claimant = solver
        elif task.state == REJECTED:
            # Revision loop: only the original claimant may pick work back up.
            if solver != task.claimant:
                raise TaskNotClaimable(f"{task_id} awaits revision by {task.claimant}")
            task.state = CLAIMED
        else:
            raise TaskNotClaimable(f"{task_id} is {task.state}")
        return task

    def decompose(self, task_id: str, caller: str, subplans: list[dict]) -> list[Task]:
        task = self.task(task_id)
        if task.state != CLAIMED:
            raise TaskNotClaimed(f"{task_id} is {task.state}")
        if task.claimant != caller:
            raise NotClaimant(f"{caller} is not the claimant of {task_id}")
        total = self.active_child_bounty(task)
        new_bounties = []
        new_ids = set()
        for plan in subplans:
            if not isinstance(plan, dict) or "intent" not in plan or "bounty" not in plan:
                raise MalformedCommand("each subplan needs intent and bounty")
            if not isinstance(plan["intent"], str) or not plan["intent"].strip():
                raise MalformedCommand("subplan intent must be a non-empty string")
            new_bounties.append(as_credits(plan["bounty"], "subplan bounty"))
            explicit = plan.get("task_id")
            if explicit is not None:
                if not isinstance(explicit, str) or explicit in self.tasks or explicit in new_ids:
                    raise MalformedCommand(f"subplan task id {explicit!r} unusable")
                new_ids.add(explicit)
        if total + sum(new_bounties) > task.bounty:
            raise BudgetExceeded(
                f"{total + sum(new_bounties)} exceeds parent bounty {task.bounty}")
        return [
            self.publish_task(caller, plan["intent"], plan["bounty"],
                              parent=task_id, task_id=plan.get("task_id"))
            for plan in subplans
        ]

    def participants_of(self, task_id: str) -> set[str]:
        task = self.task(task_id)
        if task.claimant is None:
            raise TaskNotClaimed(f"{task_id} was never claimed")
        members = {task.claimant}
        for child_id in task.plan:
            child = self.tasks[child_id]
            if child.claimant is not None:
                members.add(child.claimant)
        return members

    def submit_deliverable(self, task_id: str, caller: str, payload: str,
                           used_skills: list[str], consulted: list[str],
                           evidence: list[str]) -> Task:
        task = self.task(task_id)
        if task.state != CLAIMED:
            raise TaskNotClaimed(f"{task_id} is {task.state}")
        if task.claimant != caller:
            raise NotClaimant(f"{caller} is not the claimant of {task_id}")
        if not isinstance(payload, str):
            raise MalformedCommand("payload must be a string")
        digest = payload_digest(payload)
        self.blobs[digest] = payload
        self._deliverable_seq += 1
        task.deliverable = Deliverable(
            deliverable_id=f"d-{self._deliverable_seq}",
            payload_digest=digest,
            payload_uri=f"blob:sha256:{digest}",
            submitted_by=caller,
            evidence=[str(e) for e in evidence],
        )
        for skill in used_skills:
            if skill not in task.used_skills:
                task.used_skills.append(skill)
        for asset in consulted:
            if asset not in task.consulted_assets:
                task.consulted_assets.append(asset)
        task.state = IN_REVIEW
        return task

    def review(self, task_id: str, reviewer: str, verdict: str, feedback: str,
               final: bool, at: int) -> tuple[Task, int]:
        """Apply a review verdict; returns the task and the amount settled now.

        The requester of a task is its reviewer: the original poster for
        top-level tasks, the delegating claimant for subtasks.
        """
        task = self.task(task_id)
        if task.state != IN_REVIEW:
            raise TaskNotInReview(f"{task_id} is {task.state}")
        if reviewer != task.requester:
            raise NotAuthorizedReviewer(f"{reviewer} may not review {task_id}")
        if verdict not in ("accept", "reject"):
            raise MalformedCommand(f"verdict must be accept or reject, got {verdict!r}")
        task.review_history.append(ReviewRecord(reviewer, verdict, feedback, bool(final), at))

        if verdict == "reject":
            if final:
                task.state = FINALLY_REJECTED
                self._unwind_failed(task)
            else:
                task.state = REJECTED
            return task, 0

        task.state = ACCEPTED
        return task, self._settle_accepted(task)

    def cancel_task(self, task_id: str, by: str) -> Task:
        task = self.task(task_id)
        if by != task.requester:
            raise NotRequester(f"{by} did not publish {task_id}")
        if task.state != PUBLISHED:
            raise TaskNotCancellable(f"{task_id} is {task.state}")
        task.state = CANCELLED
        self._unwind_failed(task)
        return task

    # -- settlement --------------------------------------------------------

    def _settle_accepted(self, task: Task) -> int:
        escrow = self.ledger.escrow_for_task(task.task_id)
        if task.parent is None:
            settled = self.ledger.settle(escrow, task.claimant)
            for node in self.subtree(task):
                child_escrow = self.ledger.escrow_for_task(node.task_id)
                if child_escrow.status == ledger_mod.OPEN and child_escrow.beneficiary:
                    self.ledger.release(child_escrow)
            return settled
        if self.root_of(task).state == ACCEPTED:
            return self.ledger.settle(escrow, task.claimant)
        self.ledger.hold(escrow, task.claimant)
        return 0

    def _unwind_failed(self, task: Task) -> None:
        """Refund the failed task's subtree bottom-up, then its own escrow.

        Advances return to the escrow they were drawn from when it is still
        open, otherwise to their funder's free balance.
        """
        descendants = self.subtree(task)
        for node in reversed(descendants):
            if node.state not in TERMINAL_STATES:
                node.state = CANCELLED
            escrow = self.ledger.escrow_for_task(node.task_id)
            if escrow.status == ledger_mod.OPEN:
                self._refund(escrow, node)
        self._refund(self.ledger.escrow_for_task(task.task_id), task)

    def _refund(self, escrow, task: Task) -> None:
        if escrow.source == ledger_mod.PARENT_ADVANCE and task.parent is not None:
            parent_escrow = self.ledger.escrow_for_task(task.parent)
            if parent_escrow is not None and parent_escrow.status == ledger_mod.OPEN:
                self.ledger.refund_to_escrow(escrow, parent_escrow)
                return
        self.ledger.refund_to_participant(escrow, escrow.funder)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "tasks": {tid: t.to_dict() for tid, t in sorted(self.tasks.items())},
            "blobs": dict(sorted(self.blobs.items())),
            "task_seq": self._task_seq,
            "deliverable_seq": self._deliverable_seq,
        }
