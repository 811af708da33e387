import json
import threading

import pytest
from fastapi.testclient import TestClient

from taskmarket.errors import DataDirLocked
from taskmarket.server import build_app, build_service, parse_weights


@pytest.fixture
def harness(tmp_path):
    service, lock = build_service(tmp_path / "data", mode="fee", snapshot_every=5)
    client = TestClient(build_app(service))
    yield client, service
    service.kernel.log.close()


def register(client, pid, kind="human", endowment=0):
    r = client.post("/participants",
                    json={"participant": pid, "kind": kind, "endowment": endowment})
    assert r.status_code == 200, r.text
    return {"Authorization": f"Bearer {r.json()['token']}"}


def test_register_and_summary(harness):
    client, _ = harness
    register(client, "alice", endowment=100)
    register(client, "bob", "agent", 50)
    summary = client.get("/ledger/summary").json()
    assert summary["total"] == 150 and summary["conserved"]


def test_requires_token(harness):
    client, _ = harness
    r = client.post("/tasks", json={"intent": "x", "bounty": 1})
    assert r.status_code == 401
    r = client.post("/tasks", json={"intent": "x", "bounty": 1},
                    headers={"Authorization": "Bearer bogus"})
    assert r.status_code == 401


def test_task_lifecycle_over_http(harness):
    client, service = harness
    alice = register(client, "alice", endowment=100)
    bob = register(client, "bob", "agent", 0)

    r = client.post("/tasks", json={"intent": "make a thing", "bounty": 50,
                                    "task_id": "t1"}, headers=alice)
    assert r.json()["task"]["state"] == "Published"
    assert client.post("/tasks/t1/claim", headers=bob).status_code == 200
    r = client.post("/tasks/t1/submit", json={"payload": "the thing",
                                              "evidence": ["log"]}, headers=bob)
    assert r.json()["task"]["state"] == "InReview"
    r = client.post("/tasks/t1/review", json={"verdict": "accept", "feedback": "ok"},
                    headers=alice)
    assert r.status_code == 200 and r.json()["settled"] == 50

    # endpoint output must agree with a direct kernel query
    summary = client.get("/ledger/summary").json()
    assert summary == service.query(lambda k: k.balance_report())
    assert summary["accounts"]["bob"]["free"] == 50

    tasks = client.get("/tasks", params={"state": "Accepted"}).json()
    assert [t["task_id"] for t in tasks] == ["t1"]
    detail = client.get("/tasks/t1").json()
    assert detail["state"] == "Accepted"
    blob = client.get(f"/blobs/{detail['deliverable']['payload_digest']}")
    assert blob.text == "the thing"


def test_error_body_carries_kernel_code(harness):
    client, _ = harness
    alice = register(client, "alice", endowment=10)
    r = client.post("/tasks", json={"intent": "x", "bounty": 99}, headers=alice)
    assert r.status_code == 409
    assert r.json()["error"]["code"] == "InsufficientCredits"
    r = client.post("/tasks/absent/claim", headers=alice)
    assert r.status_code == 404
    assert r.json()["error"]["code"] == "UnknownTask"
    r = client.post("/tasks", json={"intent": "x", "bounty": 1, "task_id": "t1"},
                    headers=alice)
    r = client.post("/tasks/t1/cancel", headers=register(client, "eve"))
    assert r.status_code == 403
    assert r.json()["error"]["code"] == "NotRequester"


def test_duplicate_registration_conflict(harness):
    client, _ = harness
    register(client, "alice")
    r = client.post("/participants", json={"participant": "alice", "kind": "human",
                                           "endowment": 1})
    assert r.status_code == 409
    assert r.json()["error"]["code"] == "DuplicateParticipant"


def test_asset_endpoints(harness):
    client, _ = harness
    alice = register(client, "alice", endowment=20)
    bob = register(client, "bob", "agent", 5)
    client.post("/tasks", json={"intent": "seed", "bounty": 0, "task_id": "seed"},
                headers=alice)
    client.post("/tasks/seed/claim", headers=bob)
    client.post("/tasks/seed/submit", json={"payload": "work"}, headers=bob)
    client.post("/tasks/seed/review", json={"verdict": "accept"}, headers=alice)
    payload = json.dumps({"behavior": {json.dumps("a"): "b"}})
    r = client.post("/assets/propose", json={"task": "seed", "items": [{
        "name": "helper", "kind": "skill", "interface": "a -> b",
        "payload": payload, "test_vectors": [{"input": "a", "output": "b"}],
        "reward_schedule": {"kind": "constant", "alpha": 1}}]}, headers=bob)
    assert r.status_code == 200
    r = client.post("/assets/helper/validate", json={"validators": []}, headers=bob)
    assert r.json()["report"]["verdict"] == 1
    r = client.post("/tasks/seed/admit-assets", headers=bob)
    assert [a["asset_id"] for a in r.json()["admitted"]] == ["helper"]

    client.post("/tasks", json={"intent": "use", "bounty": 2, "task_id": "use"},
                headers=alice)
    client.post("/tasks/use/claim", headers=bob)
    r = client.post("/assets/helper/invocations",
                    json={"task": "use", "success": True, "latency_ms": 40},
                    headers=bob)
    assert r.json()["paid"] is False  # creator invoking own skill

    assets = client.get("/assets", params={"status": "admitted"}).json()
    assert [a["asset_id"] for a in assets] == ["helper"]
    assert client.get("/assets/helper/lineage").json() == []
    scores = client.get("/assets/score", params={"ids": "helper"}).json()
    assert scores[0]["asset"] == "helper"
    graph = client.get("/assets/graph").json()
    assert graph["nodes"] == ["helper"]
    dot = client.get("/assets/graph", params={"format": "dot"})
    assert dot.text.startswith("digraph assets {")


def test_events_endpoint(harness):
    client, _ = harness
    register(client, "alice", endowment=5)
    register(client, "bob")
    events = client.get("/events", params={"from": 2}).json()
    assert [e["seq"] for e in events] == [2]
    assert events[0]["command"]["type"] == "open_account"


def test_ledger_account_view(harness):
    client, _ = harness
    alice = register(client, "alice", endowment=30)
    client.post("/tasks", json={"intent": "x", "bounty": 10}, headers=alice)
    view = client.get("/ledger/alice").json()
    assert view["free"] == 20 and view["locked"] == 10
    assert view["entries"][0]["kind"] == "endowment"


def test_concurrent_claims_single_winner(harness):
    client, service = harness
    alice = register(client, "alice", endowment=10)
    tokens = [register(client, f"solver{i}", "agent") for i in range(6)]
    client.post("/tasks", json={"intent": "race", "bounty": 5, "task_id": "t1"},
                headers=alice)
    results = []
    barrier = threading.Barrier(len(tokens))

    def attempt(headers):
        barrier.wait()
        results.append(client.post("/tasks/t1/claim", headers=headers).status_code)

    threads = [threading.Thread(target=attempt, args=(tok,)) for tok in tokens]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(results) == [200] + [409] * 5
    claims = [e for e in service.kernel.log.events if e.command["type"] == "claim_task"]
    assert len(claims) == 1


def test_snapshots_written_and_consistent(harness, tmp_path):
    client, service = harness
    alice = register(client, "alice", endowment=50)
    for i in range(6):
        client.post("/tasks", json={"intent": f"task {i}", "bounty": 1}, headers=alice)
    snaps = sorted(service.snapshot_dir.glob("snap-*.json"))
    assert snaps, "snapshot_every=5 should have produced at least one snapshot"
    snap = json.loads(snaps[0].read_text())
    from taskmarket import Kernel
    prefix = service.kernel.log.lines
    events_seen = 0
    cut = 0
    for i, line in enumerate(prefix):
        if "command" in json.loads(line):
            events_seen += 1
        if events_seen == snap["as_of_seq"]:
            cut = i + 1
    # include trailing entry lines of the snapshot event
    while cut < len(prefix) and "entry" in json.loads(prefix[cut]):
        cut += 1
    replayed = Kernel.replay(prefix[:cut])
    assert replayed.snapshot() == snap


def test_data_dir_lock(tmp_path):
    service, lock = build_service(tmp_path / "d")
    with pytest.raises(DataDirLocked):
        build_service(tmp_path / "d")
    lock.unlink()
    service.kernel.log.close()


def test_restart_resumes_state(tmp_path):
    service, lock = build_service(tmp_path / "d")
    client = TestClient(build_app(service))
    alice = register(client, "alice", endowment=25)
    client.post("/tasks", json={"intent": "persist me", "bounty": 5}, headers=alice)
    digest = service.kernel.state_digest()
    service.kernel.log.close()
    lock.unlink()

    service2, lock2 = build_service(tmp_path / "d")
    assert service2.kernel.state_digest() == digest
    # the old token still authenticates after restart
    client2 = TestClient(build_app(service2))
    r = client2.post("/tasks", json={"intent": "again", "bounty": 5}, headers=alice)
    assert r.status_code == 200
    service2.kernel.log.close()


def test_parse_weights():
    w = parse_weights("0.5,0.2,0.2,0.1")
    assert (w.success, w.latency, w.frequency, w.acceptance) == (0.5, 0.2, 0.2, 0.1)
    from taskmarket.errors import MalformedCommand
    with pytest.raises(MalformedCommand):
        parse_weights("1,2")
