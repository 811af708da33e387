"""Validated reusable-asset registry with a dependency-aware graph.

Assets arrive as candidates harvested from accepted tasks, pass a
per-kind validation gate, and only then join the persistent set. Edges
always point from a pre-existing admitted asset to the newly admitted
one, which keeps the graph acyclic by construction. Admitted assets are
never removed; re-proposing a name creates a new version node linked by
a version_of edge.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable

from .errors import (
    AssetNotAdmitted,
    AssetNotCandidate,
    EmptyCandidateSet,
    MalformedCommand,
    UnknownDependency,
    ValidationIncomplete,
    ValidatorUnavailable,
)
from .ledger import RewardSchedule

SKILL = "skill"
WORKFLOW = "workflow"
TRACE = "trace"
EXPERIENCE = "experience"
KINDS = (SKILL, WORKFLOW, TRACE, EXPERIENCE)

CANDIDATE = "candidate"
ADMITTED = "admitted"
REJECTED = "rejected"

RELATIONS = ("depends", "derives", "composes", "version_of")
LINEAGE_RELATIONS = ("depends", "derives", "composes")

Executor = Callable[[str, object], object]


def content_digest(payload: str) -> str:
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def table_executor(payload: str, input_value: object) -> object:
    """Reference deterministic executor: the payload is its behavior table.

    A skill payload is a JSON object whose "behavior" member maps the
    canonical JSON encoding of each input to its output.
    """
    spec = json.loads(payload)
    table = spec["behavior"]
    key = json.dumps(input_value, sort_keys=True, separators=(",", ":"))
    if key not in table:
        raise KeyError(f"no behavior for input {key}")
    return table[key]


@dataclass
class AssetMetrics:
    success_count: int = 0
    failure_count: int = 0
    latency_sum_ms: int = 0
    latency_samples: int = 0
    acceptance_hits: int = 0

    @property
    def invocation_count(self) -> int:
        return self.success_count + self.failure_count

    def mean_latency_ms(self) -> float:
        if self.latency_samples == 0:
            return 0.0
        return self.latency_sum_ms / self.latency_samples

    def to_dict(self) -> dict:
        return {
            "success_count": self.success_count,
            "failure_count": self.failure_count,
            "invocation_count": self.invocation_count,
            "latency_sum_ms": self.latency_sum_ms,
            "latency_samples": self.latency_samples,
            "acceptance_hits": self.acceptance_hits,
        }


@dataclass
class AssetEdge:
    src: str  # pre-existing asset
    dst: str  # newly admitted asset
    relation: str

    def to_dict(self) -> dict:
        return {"from": self.src, "to": self.dst, "relation": self.relation}


@dataclass
class Asset:
    asset_id: str
    name: str
    version: int
    kind: str
    creator: str
    origin_task: str
    payload: str
    content_digest: str
    interface: str = ""
    test_vectors: list[dict] = field(default_factory=list)
    dependencies: list[dict] = field(default_factory=list)  # claimed at proposal
    reward_schedule: RewardSchedule = field(default_factory=RewardSchedule)
    status: str = CANDIDATE
    metrics: AssetMetrics = field(default_factory=AssetMetrics)

    def to_dict(self) -> dict:
        return {
            "asset_id": self.asset_id,
            "name": self.name,
            "version": self.version,
            "kind": self.kind,
            "creator": self.creator,
            "origin_task": self.origin_task,
            "content_digest": self.content_digest,
            "interface": self.interface,
            "test_vectors": self.test_vectors,
            "dependencies": self.dependencies,
            "reward_schedule": self.reward_schedule.to_dict(),
            "status": self.status,
            "metrics": self.metrics.to_dict(),
        }


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class ValidationReport:
    asset: str
    checks: list[CheckResult]
    verdict: int  # 1 iff every check passed

    def to_dict(self) -> dict:
        return {"asset": self.asset, "checks": [c.to_dict() for c in self.checks],
                "verdict": self.verdict}


@dataclass
class ScoreWeights:
    success: float = 0.4
    latency: float = 0.2
    frequency: float = 0.2
    acceptance: float = 0.2
    latency_scale_ms: float = 1000.0

    @staticmethod
    def from_dict(raw: dict | None) -> "ScoreWeights":
        if not raw:
            return ScoreWeights()
        weights = ScoreWeights()
        for key in ("success", "latency", "frequency", "acceptance", "latency_scale_ms"):
            if key in raw:
                value = raw[key]
                if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
                    raise MalformedCommand(f"score weight {key} must be a non-negative number")
                setattr(weights, key, float(value))
        return weights


# Mandatory validation checks per asset kind; skills additionally run
# their declared test vectors through the executor.
MANDATORY_CHECKS = {
    SKILL: ("structural", "digest", "test_vectors"),
    WORKFLOW: ("structural", "digest"),
    TRACE: ("structural", "digest"),
    EXPERIENCE: ("structural", "digest"),
}


class AssetRegistry:
    def __init__(self, executor: Executor = table_executor):
        self.executor = executor
        self.assets: dict[str, Asset] = {}
        self.edges: list[AssetEdge] = []
        self.reports: dict[str, ValidationReport] = {}
        self.name_versions: dict[str, list[str]] = {}

    # -- lookups -----------------------------------------------------------

    def asset(self, asset_id: str) -> Asset:
        try:
            return self.assets[asset_id]
        except KeyError:
            raise AssetNotAdmitted(asset_id) from None

    def admitted(self, asset_id: str) -> Asset:
        asset = self.asset(asset_id)
        if asset.status != ADMITTED:
            raise AssetNotAdmitted(asset_id)
        return asset

    def admitted_skill(self, asset_id: str) -> Asset:
        asset = self.admitted(asset_id)
        if asset.kind != SKILL:
            raise AssetNotAdmitted(f"{asset_id} is a {asset.kind}, not a skill")
        return asset

    def admitted_ids(self) -> list[str]:
        return [aid for aid, a in self.assets.items() if a.status == ADMITTED]

    # -- proposal ----------------------------------------------------------

    def propose(self, origin_task: str, creator: str, items: list[dict]) -> list[Asset]:
        parsed = [self._parse_item(item) for item in items]
        created = []
        for item in parsed:
            versions = self.name_versions.setdefault(item["name"], [])
            version = len(versions) + 1
            asset_id = item["name"] if version == 1 else f"{item['name']}@v{version}"
            asset = Asset(
                asset_id=asset_id,
                name=item["name"],
                version=version,
                kind=item["kind"],
                creator=creator,
                origin_task=origin_task,
                payload=item["payload"],
                content_digest=content_digest(item["payload"]),
                interface=item["interface"],
                test_vectors=item["test_vectors"],
                dependencies=item["dependencies"],
                reward_schedule=item["reward_schedule"],
            )
            versions.append(asset_id)
            self.assets[asset_id] = asset
            created.append(asset)
        return created

    def _parse_item(self, item) -> dict:
        if not isinstance(item, dict):
            raise MalformedCommand("asset item must be an object")
        name = item.get("name")
        if not isinstance(name, str) or not name.strip() or "@" in name:
            raise MalformedCommand("asset name must be a non-empty string without '@'")
        kind = item.get("kind")
        if kind not in KINDS:
            raise MalformedCommand(f"asset kind must be one of {KINDS}, got {kind!r}")
        payload = item.get("payload", "")
        if not isinstance(payload, str):
            raise MalformedCommand("asset payload must be a string")
        interface = item.get("interface", "")
        if not isinstance(interface, str):
            raise MalformedCommand("asset interface must be a string")
        vectors = item.get("test_vectors", [])
        if not isinstance(vectors, list):
            raise MalformedCommand("test_vectors must be a list")
        deps = []
        for dep in item.get("dependencies", []):
            if not isinstance(dep, dict) or "asset" not in dep:
                raise MalformedCommand("each dependency needs an asset id")
            relation = dep.get("relation", "depends")
            if relation not in LINEAGE_RELATIONS:
                raise MalformedCommand(f"dependency relation must be one of {LINEAGE_RELATIONS}")
            target = self.assets.get(dep["asset"])
            if target is None or target.status != ADMITTED:
                raise UnknownDependency(dep["asset"])
            deps.append({"asset": dep["asset"], "relation": relation})
        return {
            "name": name, "kind": kind, "payload": payload, "interface": interface,
            "test_vectors": vectors, "dependencies": deps,
            "reward_schedule": RewardSchedule.from_dict(item.get("reward_schedule")),
        }

    # -- validation --------------------------------------------------------

    def validate(self, asset_id: str, validators: list[dict] | None = None) -> ValidationReport:
        asset = self.asset(asset_id)
        if asset.status != CANDIDATE:
            raise AssetNotCandidate(f"{asset_id} is {asset.status}")
        requested = list(validators or [])
        known = {"structural", "digest", "test_vectors", "manual_review"}
        for spec in requested:
            if not isinstance(spec, dict) or spec.get("check") not in known:
                raise ValidatorUnavailable(str(spec))
        checks = []
        for name in MANDATORY_CHECKS[asset.kind]:
            checks.append(self._run_check(asset, name, {}))
        for spec in requested:
            name = spec["check"]
            if name in MANDATORY_CHECKS[asset.kind]:
                continue  # already ran
            checks.append(self._run_check(asset, name, spec))
        verdict = 1 if all(c.passed for c in checks) else 0
        report = ValidationReport(asset_id, checks, verdict)
        self.reports[asset_id] = report
        return report

    def _run_check(self, asset: Asset, name: str, spec: dict) -> CheckResult:
        if name == "structural":
            return self._check_structural(asset)
        if name == "digest":
            ok = content_digest(asset.payload) == asset.content_digest
            return CheckResult("digest", ok, "" if ok else "stored digest mismatch")
        if name == "test_vectors":
            return self._check_vectors(asset)
        if name == "manual_review":
            approved = bool(spec.get("approved", False))
            return CheckResult("manual_review", approved, str(spec.get("note", "")))
        raise ValidatorUnavailable(name)

    def _check_structural(self, asset: Asset) -> CheckResult:
        problems = []
        if not asset.payload:
            problems.append("empty payload")
        if asset.kind == SKILL:
            if not asset.interface:
                problems.append("skill declares no interface")
            for vector in asset.test_vectors:
                if not isinstance(vector, dict) or "input" not in vector or "output" not in vector:
                    problems.append("malformed test vector")
                    break
        return CheckResult("structural", not problems, "; ".join(problems))

    def _check_vectors(self, asset: Asset) -> CheckResult:
        if self.executor is None:
            raise ValidatorUnavailable("no executor configured for test_vectors")
        failures = []
        for i, vector in enumerate(asset.test_vectors):
            if not isinstance(vector, dict) or "input" not in vector or "output" not in vector:
                failures.append(f"vector {i} malformed")
                continue
            try:
                got = self.executor(asset.payload, vector["input"])
            except Exception as exc:  # executor errors fail the vector, not the command
                failures.append(f"vector {i} raised {type(exc).__name__}")
                continue
            if got != vector["output"]:
                failures.append(f"vector {i} expected {vector['output']!r}, got {got!r}")
        return CheckResult("test_vectors", not failures, "; ".join(failures))

    # -- admission ---------------------------------------------------------

    def admit(self, origin_task: str) -> list[Asset]:
        pending = [a for a in self.assets.values()
                   if a.origin_task == origin_task and a.status == CANDIDATE]
        missing = [a.asset_id for a in pending if a.asset_id not in self.reports]
        if missing:
            raise ValidationIncomplete(", ".join(missing))
        admitted = []
        for asset in pending:
            if self.reports[asset.asset_id].verdict != 1:
                asset.status = REJECTED
                continue
            asset.status = ADMITTED
            for dep in asset.dependencies:
                self.edges.append(AssetEdge(dep["asset"], asset.asset_id, dep["relation"]))
            prior = self._latest_admitted_prior(asset)
            if prior is not None:
                self.edges.append(AssetEdge(prior, asset.asset_id, "version_of"))
            admitted.append(asset)
        return admitted

    def _latest_admitted_prior(self, asset: Asset) -> str | None:
        for aid in reversed(self.name_versions[asset.name]):
            if aid == asset.asset_id:
                continue
            candidate = self.assets[aid]
            if candidate.status == ADMITTED and candidate.version < asset.version:
                return aid
        return None

    # -- metrics -----------------------------------------------------------

    def record_invocation(self, skill_id: str, success: bool, latency_ms: int) -> AssetMetrics:
        asset = self.admitted_skill(skill_id)
        if isinstance(latency_ms, bool) or not isinstance(latency_ms, int) or latency_ms < 0:
            raise MalformedCommand("latency_ms must be a non-negative integer")
        metrics = asset.metrics
        if success:
            metrics.success_count += 1
        else:
            metrics.failure_count += 1
        metrics.latency_sum_ms += latency_ms
        metrics.latency_samples += 1
        return metrics

    def record_acceptance(self, skill_id: str) -> None:
        asset = self.assets.get(skill_id)
        if asset is not None and asset.status == ADMITTED:
            asset.metrics.acceptance_hits += 1

    # -- selection ---------------------------------------------------------

    def score_capability(self, candidate_ids: list[str],
                         weights: ScoreWeights | None = None) -> list[tuple[str, float]]:
        if not candidate_ids:
            raise EmptyCandidateSet("no candidate skills to score")
        weights = weights or ScoreWeights()
        skills = [self.admitted_skill(aid) for aid in candidate_ids]
        max_invocations = max(s.metrics.invocation_count for s in skills)
        scored = []
        for skill in skills:
            m = skill.metrics
            n = m.invocation_count
            success_rate = (m.success_count + 1) / (n + 2)
            latency_signal = 1.0 / (1.0 + m.mean_latency_ms() / weights.latency_scale_ms)
            if max_invocations == 0:
                frequency = 0.0
            else:
                frequency = math.log(1 + n) / math.log(1 + max_invocations) if n else 0.0
            acceptance = (m.acceptance_hits + 1) / (n + 2)
            score = (weights.success * success_rate
                     + weights.latency * latency_signal
                     + weights.frequency * frequency
                     + weights.acceptance * acceptance)
            scored.append((skill.asset_id, score))
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored

    # -- graph -------------------------------------------------------------

    def lineage(self, asset_id: str) -> list[dict]:
        self.admitted(asset_id)
        incoming: dict[str, list[AssetEdge]] = {}
        for edge in self.edges:
            if edge.relation in LINEAGE_RELATIONS:
                incoming.setdefault(edge.dst, []).append(edge)
        out: list[dict] = []
        seen = {asset_id}
        frontier = [asset_id]
        depth = 1
        while frontier:
            level = []
            for node in frontier:
                for edge in incoming.get(node, []):
                    if edge.src not in seen:
                        seen.add(edge.src)
                        level.append({"asset": edge.src, "relation": edge.relation,
                                      "depth": depth})
            level.sort(key=lambda item: item["asset"])
            out.extend(level)
            frontier = [item["asset"] for item in level]
            depth += 1
        return out

    def topological_order(self) -> list[str]:
        """Kahn's algorithm over admitted assets; raises on a cycle."""
        nodes = self.admitted_ids()
        indegree = {nid: 0 for nid in nodes}
        outgoing: dict[str, list[str]] = {nid: [] for nid in nodes}
        for edge in self.edges:
            outgoing[edge.src].append(edge.dst)
            indegree[edge.dst] += 1
        queue = sorted(nid for nid, deg in indegree.items() if deg == 0)
        order = []
        while queue:
            node = queue.pop(0)
            order.append(node)
            for nxt in outgoing[node]:
                indegree[nxt] -= 1
                if indegree[nxt] == 0:
                    queue.append(nxt)
        if len(order) != len(nodes):
            raise ValueError("asset graph contains a cycle")
        return order

    def graph_json(self) -> dict:
        adjacency: dict[str, list[dict]] = {aid: [] for aid in self.admitted_ids()}
        for edge in self.edges:
            adjacency[edge.src].append({"to": edge.dst, "relation": edge.relation})
        return {"nodes": sorted(adjacency), "edges": {k: adjacency[k] for k in sorted(adjacency)}}

    def graph_dot(self) -> str:
        lines = ["digraph assets {"]
        for aid in sorted(self.admitted_ids()):
            lines.append(f'  "{aid}";')
        for edge in self.edges:
            lines.append(f'  "{edge.src}" -> "{edge.dst}" [label="{edge.relation}"];')
        lines.append("}")
        return "\n".join(lines)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "assets": {aid: a.to_dict() for aid, a in sorted(self.assets.items())},
            "payloads": {aid: a.payload for aid, a in sorted(self.assets.items())},
            "edges": [e.to_dict() for e in self.edges],
            "reports": {aid: r.to_dict() for aid, r in sorted(self.reports.items())},
            "name_versions": {k: v for k, v in sorted(self.name_versions.items())},
        }
