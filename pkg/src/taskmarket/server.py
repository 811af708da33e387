"""HTTP/JSON service exposing the kernel to humans and agents.

All mutating endpoints funnel through a single lock-guarded
`Kernel.apply`, so concurrent requests serialize in arrival order and
claim races resolve deterministically. Authentication is a bearer token
minted at registration and kept outside the replayable kernel state
(tokens are service metadata, not economics). Desk-scale only: no TLS,
no replication, no rate limiting.
"""

from __future__ import annotations

import argparse
import json
import secrets
import threading
from pathlib import Path

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse

from .assets import ScoreWeights
from .errors import (
    BindFailure,
    DataDirLocked,
    KernelError,
    MalformedCommand,
)
from .events import EventLog
from .kernel import Kernel, KernelConfig

NOT_FOUND = {"UnknownTask", "UnknownParticipant", "UnknownSkill", "UnknownAssetId",
             "UnknownDependency", "AssetNotAdmitted"}
FORBIDDEN = {"NotClaimant", "NotAuthorizedReviewer", "NotRequester", "SelfClaim",
             "NotParticipant"}
BAD_REQUEST = {"MalformedCommand", "ScenarioParseError"}


def http_status(code: str) -> int:
    if code in NOT_FOUND:
        return 404
    if code in FORBIDDEN:
        return 403
    if code in BAD_REQUEST:
        return 400
    return 409  # state conflicts: InsufficientCredits, TaskNotClaimable, ...


class TokenStore:
    """participant <-> bearer token map, persisted next to the event log."""

    def __init__(self, path: Path | None = None):
        self.path = path
        self.by_token: dict[str, str] = {}
        if path is not None and path.exists():
            self.by_token = json.loads(path.read_text(encoding="utf-8"))

    def mint(self, participant: str) -> str:
        token = secrets.token_hex(16)
        self.by_token[token] = participant
        if self.path is not None:
            self.path.write_text(json.dumps(self.by_token, indent=0), encoding="utf-8")
        return token

    def participant(self, token: str) -> str | None:
        return self.by_token.get(token)


class Service:
    """Kernel plus the serialization lock and service-side metadata."""

    def __init__(self, kernel: Kernel, tokens: TokenStore,
                 snapshot_every: int = 0, snapshot_dir: Path | None = None):
        self.kernel = kernel
        self.tokens = tokens
        self.lock = threading.Lock()
        self.snapshot_every = snapshot_every
        self.snapshot_dir = snapshot_dir

    def apply(self, command: dict, actor: str):
        with self.lock:
            event, result = self.kernel.apply(command, actor)
            if self.snapshot_every and self.snapshot_dir \
                    and event.seq % self.snapshot_every == 0:
                snap = self.kernel.snapshot()
                path = self.snapshot_dir / f"snap-{snap['as_of_seq']:08d}.json"
                path.write_text(json.dumps(snap, sort_keys=True), encoding="utf-8")
            return event, result

    def query(self, fn):
        with self.lock:
            return fn(self.kernel)


def build_app(service: Service) -> FastAPI:
    app = FastAPI(title="taskmarket", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])  # desk-scale console access; auth is the bearer token

    @app.exception_handler(KernelError)
    async def kernel_error_handler(request: Request, exc: KernelError):
        return JSONResponse(
            status_code=http_status(exc.code),
            content={"error": {"code": exc.code, "message": str(exc)}},
        )

    def current_actor(authorization: str | None = Header(default=None)) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise HTTPException(status_code=401, detail="missing bearer token")
        participant = service.tokens.participant(authorization.removeprefix("Bearer "))
        if participant is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return participant

    async def body_of(request: Request) -> dict:
        try:
            raw = await request.body()
            payload = json.loads(raw) if raw else {}
        except json.JSONDecodeError:
            raise MalformedCommand("request body is not valid JSON") from None
        if not isinstance(payload, dict):
            raise MalformedCommand("request body must be a JSON object")
        return payload

    # -- registration (unauthenticated; mints the caller's token) --------

    @app.post("/participants")
    async def register(request: Request):
        body = await body_of(request)
        command = {
            "type": "open_account",
            "participant": body.get("participant"),
            "kind": body.get("kind", "human"),
            "endowment": body.get("endowment", 0),
        }
        if not isinstance(command["participant"], str) or not command["participant"]:
            raise MalformedCommand("participant must be a non-empty string")
        event, result = service.apply(command, command["participant"])
        token = service.tokens.mint(command["participant"])
        return {"event_seq": event.seq, "account": result, "token": token}

    # -- tasks -------------------------------------------------------------

    @app.post("/tasks")
    async def publish_task(request: Request, actor: str = Depends(current_actor)):
        body = await body_of(request)
        command = {"type": "publish_task", "intent": body.get("intent"),
                   "bounty": body.get("bounty")}
        if body.get("parent") is not None:
            command["parent"] = body["parent"]
        if body.get("task_id") is not None:
            command["task_id"] = body["task_id"]
        event, result = service.apply(command, actor)
        return {"event_seq": event.seq, "task": result}

    @app.get("/tasks")
    def list_tasks(state: str | None = None):
        return service.query(lambda k: k.list_tasks(state))

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str):
        return service.query(lambda k: k.taskflow.task(task_id).to_dict())

    @app.post("/tasks/{task_id}/claim")
    async def claim_task(task_id: str, actor: str = Depends(current_actor)):
        event, result = service.apply({"type": "claim_task", "task": task_id}, actor)
        return {"event_seq": event.seq, "task": result}

    @app.post("/tasks/{task_id}/decompose")
    async def decompose(task_id: str, request: Request, actor: str = Depends(current_actor)):
        body = await body_of(request)
        command = {"type": "decompose", "task": task_id,
                   "subplans": body.get("subplans", [])}
        event, result = service.apply(command, actor)
        return {"event_seq": event.seq, "children": result}

    @app.post("/tasks/{task_id}/submit")
    async def submit(task_id: str, request: Request, actor: str = Depends(current_actor)):
        body = await body_of(request)
        command = {
            "type": "submit_deliverable",
            "task": task_id,
            "payload": body.get("payload"),
            "used_skills": body.get("used_skills", []),
            "consulted": body.get("consulted", []),
            "evidence": body.get("evidence", []),
        }
        event, result = service.apply(command, actor)
        return {"event_seq": event.seq, "task": result}

    @app.post("/tasks/{task_id}/review")
    async def review(task_id: str, request: Request, actor: str = Depends(current_actor)):
        body = await body_of(request)
        command = {
            "type": "review",
            "task": task_id,
            "verdict": body.get("verdict"),
            "feedback": body.get("feedback", ""),
            "final": body.get("final", False),
        }
        event, result = service.apply(command, actor)
        return {"event_seq": event.seq, **result}

    @app.post("/tasks/{task_id}/cancel")
    async def cancel(task_id: str, actor: str = Depends(current_actor)):
        event, result = service.apply({"type": "cancel_task", "task": task_id}, actor)
        return {"event_seq": event.seq, "task": result}

    @app.get("/tasks/{task_id}/participants")
    def participants(task_id: str):
        return service.query(lambda k: sorted(k.taskflow.participants_of(task_id)))

    # -- assets ------------------------------------------------------------

    @app.post("/assets/propose")
    async def propose_assets(request: Request, actor: str = Depends(current_actor)):
        body = await body_of(request)
        command = {"type": "propose_assets", "task": body.get("task"),
                   "items": body.get("items", [])}
        event, result = service.apply(command, actor)
        return {"event_seq": event.seq, "assets": result}

    @app.post("/assets/{asset_id}/validate")
    async def validate_asset(asset_id: str, request: Request,
                             actor: str = Depends(current_actor)):
        body = await body_of(request)
        command = {"type": "validate_asset", "asset": asset_id,
                   "validators": body.get("validators", [])}
        event, result = service.apply(command, actor)
        return {"event_seq": event.seq, "report": result}

    @app.post("/tasks/{task_id}/admit-assets")
    async def admit_assets(task_id: str, actor: str = Depends(current_actor)):
        event, result = service.apply({"type": "admit_assets", "task": task_id}, actor)
        return {"event_seq": event.seq, "admitted": result}

    @app.post("/assets/{asset_id}/invocations")
    async def record_invocation(asset_id: str, request: Request,
                                actor: str = Depends(current_actor)):
        body = await body_of(request)
        command = {
            "type": "record_invocation",
            "skill": asset_id,
            "task": body.get("task"),
            "success": body.get("success"),
            "latency_ms": body.get("latency_ms"),
        }
        event, result = service.apply(command, actor)
        return {"event_seq": event.seq, **result}

    @app.get("/assets")
    def list_assets(status: str | None = None):
        def run(kernel: Kernel):
            assets = kernel.assets.assets.values()
            if status is not None:
                assets = [a for a in assets if a.status == status]
            return [a.to_dict() for a in assets]
        return service.query(run)

    @app.get("/assets/graph")
    def asset_graph(format: str = "json"):
        if format == "dot":
            return PlainTextResponse(service.query(lambda k: k.assets.graph_dot()))
        return service.query(lambda k: k.assets.graph_json())

    @app.get("/assets/score")
    def score(ids: str | None = None, w_success: float | None = None,
              w_latency: float | None = None, w_frequency: float | None = None,
              w_acceptance: float | None = None, latency_scale_ms: float | None = None):
        def run(kernel: Kernel):
            candidate_ids = ([i for i in ids.split(",") if i] if ids
                             else sorted(kernel.assets.admitted_ids()))
            candidate_ids = [
                aid for aid in candidate_ids
                if ids or kernel.assets.assets[aid].kind == "skill"
            ]
            weights = ScoreWeights(**vars(kernel.config.score_weights))
            overrides = {"success": w_success, "latency": w_latency,
                         "frequency": w_frequency, "acceptance": w_acceptance,
                         "latency_scale_ms": latency_scale_ms}
            for key, value in overrides.items():
                if value is not None:
                    setattr(weights, key, value)
            ranked = kernel.assets.score_capability(candidate_ids, weights)
            return [{"asset": aid, "score": score} for aid, score in ranked]
        return service.query(run)

    @app.get("/assets/{asset_id}")
    def get_asset(asset_id: str):
        return service.query(lambda k: k.assets.asset(asset_id).to_dict())

    @app.get("/assets/{asset_id}/lineage")
    def lineage(asset_id: str):
        return service.query(lambda k: k.assets.lineage(asset_id))

    # -- ledger and events ---------------------------------------------------

    @app.get("/ledger/summary")
    def ledger_summary():
        return service.query(lambda k: k.balance_report())

    @app.get("/ledger/{participant}")
    def ledger_account(participant: str):
        return service.query(lambda k: k.account_view(participant))

    @app.get("/events")
    def events(from_seq: int = Query(default=1, alias="from")):
        return service.query(
            lambda k: [e.to_dict() for e in k.log.events_from(from_seq)])

    @app.get("/blobs/{digest}")
    def blob(digest: str):
        def run(kernel: Kernel):
            payload = kernel.taskflow.blobs.get(digest)
            if payload is None:
                raise HTTPException(status_code=404, detail="unknown blob")
            return PlainTextResponse(payload)
        return service.query(run)

    return app


def open_data_dir(data_dir: Path) -> Path:
    """Claim the data directory; refuses to share it with a live server."""
    data_dir.mkdir(parents=True, exist_ok=True)
    lock_path = data_dir / ".lock"
    try:
        fd = lock_path.open("x")
    except FileExistsError:
        raise DataDirLocked(str(lock_path)) from None
    fd.close()
    return lock_path


def build_service(data_dir: str | Path, mode: str = "fee",
                  score_weights: ScoreWeights | None = None,
                  snapshot_every: int = 100) -> tuple[Service, Path]:
    """Open (or resume) a data directory and return a ready Service.

    Startup replays any existing log into memory, then attaches a
    write-through log on the same file so new events append after the
    replayed ones.
    """
    data_dir = Path(data_dir)
    lock_path = open_data_dir(data_dir)
    config = KernelConfig(mode=mode, score_weights=score_weights or ScoreWeights())
    log_path = data_dir / "events.jsonl"
    existing = log_path.read_text(encoding="utf-8").splitlines() if log_path.exists() else []
    kernel = Kernel.replay(existing, config) if existing else Kernel(config=config)
    file_log = EventLog(log_path)
    file_log.lines = list(kernel.log.lines)
    file_log.events = list(kernel.log.events)
    kernel.log = file_log
    snapshot_dir = data_dir / "snapshots"
    snapshot_dir.mkdir(exist_ok=True)
    tokens = TokenStore(data_dir / "tokens.json")
    service = Service(kernel, tokens, snapshot_every=snapshot_every,
                      snapshot_dir=snapshot_dir)
    return service, lock_path


def parse_weights(raw: str) -> ScoreWeights:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 4:
        raise MalformedCommand("--score-weights expects w_succ,w_lat,w_freq,w_acc")
    try:
        succ, lat, freq, acc = (float(p) for p in parts)
    except ValueError:
        raise MalformedCommand("--score-weights values must be numbers") from None
    return ScoreWeights(success=succ, latency=lat, frequency=freq, acceptance=acc)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="taskmarket-serve",
        description="Run the marketplace kernel as an HTTP/JSON service.")
    parser.add_argument("--data-dir", default="./market-data",
                        help="directory for the event log, snapshots, and tokens")
    parser.add_argument("--bind", default="127.0.0.1:8400", help="host:port to listen on")
    parser.add_argument("--mode", choices=("fee", "mint"), default="fee",
                        help="reuse rewards paid by invokers (fee) or minted (mint)")
    parser.add_argument("--score-weights", default=None,
                        help="capability score weights as w_succ,w_lat,w_freq,w_acc")
    parser.add_argument("--snapshot-every", type=int, default=100,
                        help="write a state snapshot every N events (0 disables)")
    args = parser.parse_args(argv)

    weights = parse_weights(args.score_weights) if args.score_weights else ScoreWeights()
    service, lock_path = build_service(args.data_dir, args.mode, weights,
                                       args.snapshot_every)
    app = build_app(service)

    host, _, port = args.bind.rpartition(":")
    if not host or not port.isdigit():
        raise BindFailure(f"--bind must be host:port, got {args.bind!r}")

    import uvicorn
    try:
        uvicorn.run(app, host=host, port=int(port), log_level="info")
    except SystemExit as exc:  # uvicorn exits nonzero when the port is taken
        raise BindFailure(args.bind) from exc
    finally:
        lock_path.unlink(missing_ok=True)
        service.kernel.log.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
