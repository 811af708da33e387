import pytest

from taskmarket import Kernel
from taskmarket.kernel import KernelConfig

SCENARIO_DIR = "scenarios"


def apply(kernel, actor, **command):
    """Shorthand: apply a command dict and return only the result."""
    return kernel.apply(command, actor)[1]


@pytest.fixture
def kernel():
    return Kernel(KernelConfig(mode="fee"))


@pytest.fixture
def funded(kernel):
    """Kernel with three registered participants: ann(100), ben(50), cam(30)."""
    for pid, kind, amount in [("ann", "human", 100), ("ben", "agent", 50),
                              ("cam", "agent", 30)]:
        apply(kernel, pid, type="open_account", participant=pid, kind=kind,
              endowment=amount)
    return kernel


def conservation_ok(kernel) -> bool:
    return kernel.ledger.conservation_totals()["conserved"]


def seed_skill(kernel, creator, reviewer, name="helper-skill", alpha=2,
               task_id=None, schedule=None):
    """Push one admitted skill through a zero-bounty bootstrap task."""
    import json

    task_id = task_id or f"seed-{name}"
    apply(kernel, reviewer, type="publish_task", task_id=task_id,
          intent=f"bootstrap {name}", bounty=0)
    apply(kernel, creator, type="claim_task", task=task_id)
    apply(kernel, creator, type="submit_deliverable", task=task_id,
          payload="sources", used_skills=[], consulted=[], evidence=[])
    apply(kernel, reviewer, type="review", task=task_id, verdict="accept",
          feedback="ok", final=False)
    payload = json.dumps({"behavior": {json.dumps("in"): "out"}})
    apply(kernel, creator, type="propose_assets", task=task_id, items=[{
        "name": name, "kind": "skill", "interface": "in -> out",
        "payload": payload,
        "test_vectors": [{"input": "in", "output": "out"}],
        "reward_schedule": schedule or {"kind": "constant", "alpha": alpha},
    }])
    apply(kernel, creator, type="validate_asset", asset=name, validators=[])
    admitted = apply(kernel, creator, type="admit_assets", task=task_id)
    assert [a["asset_id"] for a in admitted] == [name]
    return name
