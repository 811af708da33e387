import pytest

from taskmarket.errors import (
    BudgetExceeded,
    InsufficientCredits,
    NotAuthorizedReviewer,
    NotClaimant,
    NotRequester,
    ParentNotClaimed,
    SelfClaim,
    TaskNotCancellable,
    TaskNotClaimable,
    TaskNotClaimed,
    TaskNotInReview,
    UnknownParticipant,
)
from taskmarket.tasks import payload_digest

from conftest import apply, conservation_ok


def publish(kernel, actor, bounty, task_id=None, parent=None, intent="do work"):
    cmd = {"type": "publish_task", "intent": intent, "bounty": bounty}
    if task_id:
        cmd["task_id"] = task_id
    if parent:
        cmd["parent"] = parent
    return kernel.apply(cmd, actor)[1]


def run_to_review(kernel, task_id, requester, solver, bounty):
    publish(kernel, requester, bounty, task_id=task_id)
    apply(kernel, solver, type="claim_task", task=task_id)
    apply(kernel, solver, type="submit_deliverable", task=task_id,
          payload=f"work for {task_id}", used_skills=[], consulted=[], evidence=[])


class TestPublish:
    def test_publish_locks_bounty(self, funded):
        task = publish(funded, "ann", 50, task_id="t1")
        assert task["state"] == "Published"
        assert funded.ledger.accounts["ann"].free == 50
        assert funded.ledger.locked_of("ann") == 50

    def test_zero_bounty(self, funded):
        task = publish(funded, "ann", 0, task_id="t1")
        assert task["state"] == "Published"
        assert funded.ledger.accounts["ann"].free == 100

    def test_insufficient_credits(self, funded):
        with pytest.raises(InsufficientCredits):
            publish(funded, "cam", 31)

    def test_unregistered_requester(self, kernel):
        with pytest.raises(UnknownParticipant):
            publish(kernel, "ghost", 5)

    def test_child_requires_claimed_parent(self, funded):
        publish(funded, "ann", 50, task_id="t1")
        with pytest.raises(ParentNotClaimed):
            publish(funded, "ben", 10, parent="t1")

    def test_child_requires_claimant(self, funded):
        publish(funded, "ann", 50, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        with pytest.raises(NotClaimant):
            publish(funded, "cam", 10, parent="t1")


class TestClaim:
    def test_claim_sets_claimant(self, funded):
        publish(funded, "ann", 10, task_id="t1")
        task = apply(funded, "ben", type="claim_task", task="t1")
        assert task["state"] == "Claimed" and task["claimant"] == "ben"

    def test_single_claimant(self, funded):
        publish(funded, "ann", 10, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        with pytest.raises(TaskNotClaimable):
            apply(funded, "cam", type="claim_task", task="t1")

    def test_self_claim_rejected(self, funded):
        publish(funded, "ann", 10, task_id="t1")
        with pytest.raises(SelfClaim):
            apply(funded, "ann", type="claim_task", task="t1")

    def test_reclaim_after_rejection_original_claimant_only(self, funded):
        run_to_review(funded, "t1", "ann", "ben", 10)
        apply(funded, "ann", type="review", task="t1", verdict="reject",
              feedback="redo", final=False)
        with pytest.raises(TaskNotClaimable):
            apply(funded, "cam", type="claim_task", task="t1")
        task = apply(funded, "ben", type="claim_task", task="t1")
        assert task["state"] == "Claimed"


class TestDecompose:
    def test_within_budget(self, funded):
        publish(funded, "ann", 50, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        children = apply(funded, "ben", type="decompose", task="t1", subplans=[
            {"intent": "sub a", "bounty": 20}, {"intent": "sub b", "bounty": 20}])
        assert [c["state"] for c in children] == ["Published", "Published"]
        assert funded.taskflow.task("t1").plan == [c["task_id"] for c in children]
        assert conservation_ok(funded)

    def test_budget_exceeded(self, funded):
        publish(funded, "ann", 50, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        with pytest.raises(BudgetExceeded):
            apply(funded, "ben", type="decompose", task="t1", subplans=[
                {"intent": "sub a", "bounty": 30}, {"intent": "sub b", "bounty": 30}])

    def test_incremental_budget(self, funded):
        publish(funded, "ann", 50, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        apply(funded, "ben", type="decompose", task="t1", subplans=[
            {"intent": "sub a", "bounty": 20}, {"intent": "sub b", "bounty": 20}])
        with pytest.raises(BudgetExceeded):
            apply(funded, "ben", type="decompose", task="t1",
                  subplans=[{"intent": "sub c", "bounty": 15}])
        apply(funded, "ben", type="decompose", task="t1",
              subplans=[{"intent": "sub c", "bounty": 10}])

    def test_empty_decompose_is_noop(self, funded):
        publish(funded, "ann", 50, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        assert apply(funded, "ben", type="decompose", task="t1", subplans=[]) == []

    def test_only_claimant_decomposes(self, funded):
        publish(funded, "ann", 50, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        with pytest.raises(NotClaimant):
            apply(funded, "cam", type="decompose", task="t1",
                  subplans=[{"intent": "x", "bounty": 1}])

    def test_failed_children_release_budget(self, funded):
        publish(funded, "ann", 50, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        apply(funded, "ben", type="decompose", task="t1",
              subplans=[{"intent": "sub a", "bounty": 40, "task_id": "t1a"}])
        apply(funded, "ben", type="cancel_task", task="t1a")
        # the cancelled child's budget and escrow value both return
        apply(funded, "ben", type="decompose", task="t1",
              subplans=[{"intent": "sub b", "bounty": 40, "task_id": "t1b"}])
        assert conservation_ok(funded)


class TestParticipants:
    def test_solo(self, funded):
        publish(funded, "ann", 10, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        assert funded.taskflow.participants_of("t1") == {"ben"}

    def test_with_claimed_children(self, funded):
        publish(funded, "ann", 30, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        apply(funded, "ben", type="decompose", task="t1", subplans=[
            {"intent": "a", "bounty": 5, "task_id": "t1a"},
            {"intent": "b", "bounty": 5, "task_id": "t1b"}])
        apply(funded, "cam", type="claim_task", task="t1a")
        assert funded.taskflow.participants_of("t1") == {"ben", "cam"}
        apply(funded, "ann", type="claim_task", task="t1b")
        assert funded.taskflow.participants_of("t1") == {"ben", "cam", "ann"}

    def test_unclaimed_children_excluded(self, funded):
        publish(funded, "ann", 30, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        apply(funded, "ben", type="decompose", task="t1",
              subplans=[{"intent": "a", "bounty": 5}])
        assert funded.taskflow.participants_of("t1") == {"ben"}

    def test_unclaimed_task_errors(self, funded):
        publish(funded, "ann", 10, task_id="t1")
        with pytest.raises(TaskNotClaimed):
            funded.taskflow.participants_of("t1")


class TestSubmitReview:
    def test_submit_moves_to_review(self, funded):
        run_to_review(funded, "t1", "ann", "ben", 10)
        task = funded.taskflow.task("t1")
        assert task.state == "InReview"
        assert task.deliverable.payload_digest == payload_digest("work for t1")
        assert funded.taskflow.blobs[task.deliverable.payload_digest] == "work for t1"

    def test_only_claimant_submits(self, funded):
        publish(funded, "ann", 10, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        with pytest.raises(NotClaimant):
            apply(funded, "cam", type="submit_deliverable", task="t1", payload="x",
                  used_skills=[], consulted=[], evidence=[])

    def test_accept_settles(self, funded):
        run_to_review(funded, "t1", "ann", "ben", 50)
        result = apply(funded, "ann", type="review", task="t1", verdict="accept",
                       feedback="nice", final=False)
        assert result["settled"] == 50
        assert funded.ledger.accounts["ben"].free == 100
        assert funded.ledger.accounts["ann"].free == 50

    def test_reject_final_refunds(self, funded):
        run_to_review(funded, "t1", "ann", "ben", 50)
        result = apply(funded, "ann", type="review", task="t1", verdict="reject",
                       feedback="no", final=True)
        assert result["settled"] == 0
        assert result["task"]["state"] == "FinallyRejected"
        assert funded.ledger.accounts["ann"].free == 100
        assert funded.ledger.accounts["ben"].free == 50

    def test_revision_loop_single_settlement(self, funded):
        run_to_review(funded, "t1", "ann", "ben", 50)
        apply(funded, "ann", type="review", task="t1", verdict="reject",
              feedback="more research", final=False)
        apply(funded, "ben", type="claim_task", task="t1")
        apply(funded, "ben", type="submit_deliverable", task="t1", payload="v2",
              used_skills=[], consulted=[], evidence=[])
        result = apply(funded, "ann", type="review", task="t1", verdict="accept",
                       feedback="better", final=False)
        assert result["settled"] == 50
        task = funded.taskflow.task("t1")
        assert len(task.review_history) == 2
        settles = [e for e in funded.ledger.entries if e.kind == "settle" and e.task == "t1"]
        assert len(settles) == 1 and settles[0].amount == 50

    def test_reviewer_must_be_requester(self, funded):
        run_to_review(funded, "t1", "ann", "ben", 10)
        with pytest.raises(NotAuthorizedReviewer):
            apply(funded, "cam", type="review", task="t1", verdict="accept",
                  feedback="", final=False)

    def test_review_requires_in_review(self, funded):
        publish(funded, "ann", 10, task_id="t1")
        with pytest.raises(TaskNotInReview):
            apply(funded, "ann", type="review", task="t1", verdict="accept",
                  feedback="", final=False)


class TestCancel:
    def test_cancel_published(self, funded):
        publish(funded, "ann", 20, task_id="t1")
        task = apply(funded, "ann", type="cancel_task", task="t1")
        assert task["state"] == "Cancelled"
        assert funded.ledger.accounts["ann"].free == 100

    def test_cancel_claimed_fails(self, funded):
        publish(funded, "ann", 20, task_id="t1")
        apply(funded, "ben", type="claim_task", task="t1")
        with pytest.raises(TaskNotCancellable):
            apply(funded, "ann", type="cancel_task", task="t1")

    def test_only_requester_cancels(self, funded):
        publish(funded, "ann", 20, task_id="t1")
        with pytest.raises(NotRequester):
            apply(funded, "ben", type="cancel_task", task="t1")


class TestDelegatedSettlement:
    """Two-phase subtask settlement and subtree unwind."""

    def setup_tree(self, kernel):
        """ann posts 50; ben claims and delegates 20 to cam, who delivers."""
        publish(kernel, "ann", 50, task_id="root")
        apply(kernel, "ben", type="claim_task", task="root")
        apply(kernel, "ben", type="decompose", task="root",
              subplans=[{"intent": "part", "bounty": 20, "task_id": "sub"}])
        apply(kernel, "cam", type="claim_task", task="sub")
        apply(kernel, "cam", type="submit_deliverable", task="sub", payload="part done",
              used_skills=[], consulted=[], evidence=[])

    def test_subtask_accept_holds_until_root(self, funded):
        self.setup_tree(funded)
        result = apply(funded, "ben", type="review", task="sub", verdict="accept",
                       feedback="good part", final=False)
        assert result["settled"] == 0  # held, not paid
        assert funded.ledger.accounts["cam"].free == 30
        escrow = funded.ledger.escrow_for_task("sub")
        assert escrow.status == "open" and escrow.held == 20

    def test_root_accept_releases_holds(self, funded):
        self.setup_tree(funded)
        apply(funded, "ben", type="review", task="sub", verdict="accept",
              feedback="", final=False)
        apply(funded, "ben", type="submit_deliverable", task="root", payload="assembled",
              used_skills=[], consulted=[], evidence=[])
        result = apply(funded, "ann", type="review", task="root", verdict="accept",
                       feedback="", final=False)
        assert result["settled"] == 30  # 50 minus the 20 advanced to the subtask
        assert funded.ledger.accounts["ben"].free == 80
        assert funded.ledger.accounts["cam"].free == 50
        assert funded.ledger.accounts["ann"].free == 50
        assert conservation_ok(funded)

    def test_root_final_reject_unwinds_holds(self, funded):
        self.setup_tree(funded)
        apply(funded, "ben", type="review", task="sub", verdict="accept",
              feedback="", final=False)
        apply(funded, "ben", type="submit_deliverable", task="root", payload="assembled",
              used_skills=[], consulted=[], evidence=[])
        apply(funded, "ann", type="review", task="root", verdict="reject",
              feedback="unusable", final=True)
        assert funded.ledger.accounts["ann"].free == 100
        assert funded.ledger.accounts["ben"].free == 50
        assert funded.ledger.accounts["cam"].free == 30
        assert funded.ledger.escrow_for_task("sub").status == "refunded"
        assert conservation_ok(funded)

    def test_root_final_reject_cancels_inflight_children(self, funded):
        self.setup_tree(funded)
        apply(funded, "ben", type="submit_deliverable", task="root", payload="partial",
              used_skills=[], consulted=[], evidence=[])
        apply(funded, "ann", type="review", task="root", verdict="reject",
              feedback="", final=True)
        sub = funded.taskflow.task("sub")
        assert sub.state == "Cancelled"
        assert funded.ledger.accounts["ann"].free == 100
        assert conservation_ok(funded)

    def test_subtask_final_reject_restores_parent_headroom(self, funded):
        self.setup_tree(funded)
        apply(funded, "ben", type="review", task="sub", verdict="reject",
              feedback="wrong", final=True)
        root_escrow = funded.ledger.escrow_for_task("root")
        assert root_escrow.balance == 50
        apply(funded, "ben", type="decompose", task="root",
              subplans=[{"intent": "retry", "bounty": 20, "task_id": "sub2"}])
        assert conservation_ok(funded)

    def test_late_child_accept_after_root_settled(self, funded):
        self.setup_tree(funded)
        apply(funded, "ben", type="submit_deliverable", task="root", payload="assembled",
              used_skills=[], consulted=[], evidence=[])
        result = apply(funded, "ann", type="review", task="root", verdict="accept",
                       feedback="", final=False)
        assert result["settled"] == 30
        sub_result = apply(funded, "ben", type="review", task="sub", verdict="accept",
                           feedback="late", final=False)
        assert sub_result["settled"] == 20  # root already accepted: pay now
        assert funded.ledger.accounts["cam"].free == 50
        assert conservation_ok(funded)

    def test_late_child_reject_refunds_delegator(self, funded):
        self.setup_tree(funded)
        apply(funded, "ben", type="submit_deliverable", task="root", payload="assembled",
              used_skills=[], consulted=[], evidence=[])
        apply(funded, "ann", type="review", task="root", verdict="accept",
              feedback="", final=False)
        apply(funded, "ben", type="review", task="sub", verdict="reject",
              feedback="late and wrong", final=True)
        # ben was paid 30 at settlement; the failed advance returns to ben
        assert funded.ledger.accounts["ben"].free == 100
        assert conservation_ok(funded)

    def test_nested_delegation_settles_each_level(self, funded):
        publish(funded, "ann", 50, task_id="root")
        apply(funded, "ben", type="claim_task", task="root")
        apply(funded, "ben", type="decompose", task="root",
              subplans=[{"intent": "mid", "bounty": 30, "task_id": "mid"}])
        apply(funded, "cam", type="claim_task", task="mid")
        apply(funded, "cam", type="decompose", task="mid",
              subplans=[{"intent": "leaf", "bounty": 10, "task_id": "leaf"}])
        apply(funded, "ann", type="claim_task", task="leaf")
        apply(funded, "ann", type="submit_deliverable", task="leaf", payload="leaf work",
              used_skills=[], consulted=[], evidence=[])
        apply(funded, "cam", type="review", task="leaf", verdict="accept",
              feedback="", final=False)
        apply(funded, "cam", type="submit_deliverable", task="mid", payload="mid work",
              used_skills=[], consulted=[], evidence=[])
        apply(funded, "ben", type="review", task="mid", verdict="accept",
              feedback="", final=False)
        apply(funded, "ben", type="submit_deliverable", task="root", payload="root work",
              used_skills=[], consulted=[], evidence=[])
        result = apply(funded, "ann", type="review", task="root", verdict="accept",
                       feedback="", final=False)
        assert result["settled"] == 20         # ben: 50 - 30
        assert funded.ledger.accounts["ben"].free == 70
        assert funded.ledger.accounts["cam"].free == 50   # 30 + (30 - 10)
        assert funded.ledger.accounts["ann"].free == 60   # 100 - 50 + 10
        assert conservation_ok(funded)


def test_deliverable_integrity(funded):
    run_to_review(funded, "t1", "ann", "ben", 5)
    task = funded.taskflow.task("t1")
    stored = funded.taskflow.blobs[task.deliverable.payload_digest]
    assert payload_digest(stored) == task.deliverable.payload_digest


def test_working_set_grows_monotonically(funded):
    publish(funded, "ann", 30, task_id="t1")
    apply(funded, "ben", type="claim_task", task="t1")
    snapshots = [funded.taskflow.participants_of("t1")]
    apply(funded, "ben", type="decompose", task="t1", subplans=[
        {"intent": "a", "bounty": 5, "task_id": "t1a"},
        {"intent": "b", "bounty": 5, "task_id": "t1b"}])
    snapshots.append(funded.taskflow.participants_of("t1"))
    apply(funded, "cam", type="claim_task", task="t1a")
    snapshots.append(funded.taskflow.participants_of("t1"))
    apply(funded, "ann", type="claim_task", task="t1b")
    snapshots.append(funded.taskflow.participants_of("t1"))
    for earlier, later in zip(snapshots, snapshots[1:]):
        assert earlier <= later
    assert all("ben" in s for s in snapshots)
