"""Scenario files: scripted actions plus parameterized policy blocks.

Schema (version 1):

    {
      "schema_version": 1,
      "name": "case-study",
      "seed": 7,
      "participants": [{"id": "alice", "kind": "human", "endowment": 100}],
      "script": [
        {"actor": "alice", "command": {"type": "publish_task", ...}},
        {"actor": "bob", "command": {...}, "expect_error": "InsufficientCredits"},
        {"policy": {"rounds": 50, "task_arrival_rate": 1.0, ...}}
      ]
    }

Scripted actions are verbatim kernel commands. A policy block hands
control to the seeded random-economy generator for `rounds` rounds.
The same (scenario, seed) pair always produces the identical event log.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ScenarioParseError

SCHEMA_VERSION = 1


@dataclass
class ScriptAction:
    actor: str
    command: dict
    expect_error: str | None = None
    note: str = ""


@dataclass
class PolicyBlock:
    rounds: int = 10
    task_arrival_rate: float = 1.0
    claim_probability: float = 0.8
    decomposition_probability: float = 0.2
    skill_reuse_preference: float = 0.7
    invocation_rate: float = 1.5
    submit_probability: float = 0.6
    review_strictness: float = 0.3
    final_reject_probability: float = 0.3
    skill_creation_probability: float = 0.3
    broken_candidate_probability: float = 0.2
    cancel_probability: float = 0.05
    max_bounty: int = 40

    @staticmethod
    def from_dict(raw: dict) -> "PolicyBlock":
        block = PolicyBlock()
        for key, value in raw.items():
            if not hasattr(block, key):
                raise ScenarioParseError(f"unknown policy parameter {key!r}")
            if key in ("rounds", "max_bounty"):
                if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                    raise ScenarioParseError(f"policy {key} must be a non-negative integer")
            elif isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
                raise ScenarioParseError(f"policy {key} must be a non-negative number")
            setattr(block, key, value)
        return block


@dataclass
class Scenario:
    name: str
    seed: int
    participants: list[dict]
    script: list  # ScriptAction | PolicyBlock, in order
    source_path: str | None = None

    @property
    def endowment_total(self) -> int:
        return sum(p["endowment"] for p in self.participants)


def parse_scenario(raw: dict, source_path: str | None = None) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioParseError("scenario must be a JSON object")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ScenarioParseError(
            f"unsupported schema_version {raw.get('schema_version')!r}, expected {SCHEMA_VERSION}")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioParseError("scenario needs a non-empty name")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioParseError("seed must be an integer")

    participants = raw.get("participants", [])
    if not isinstance(participants, list) or not participants:
        raise ScenarioParseError("scenario needs at least one participant")
    seen_ids = set()
    for p in participants:
        if not isinstance(p, dict) or not isinstance(p.get("id"), str) or not p["id"]:
            raise ScenarioParseError("each participant needs a string id")
        if p["id"] in seen_ids:
            raise ScenarioParseError(f"duplicate participant id {p['id']!r}")
        seen_ids.add(p["id"])
        if p.get("kind", "agent") not in ("human", "agent"):
            raise ScenarioParseError(f"participant {p['id']}: kind must be human or agent")
        endowment = p.get("endowment", 0)
        if isinstance(endowment, bool) or not isinstance(endowment, int) or endowment < 0:
            raise ScenarioParseError(f"participant {p['id']}: endowment must be an int >= 0")
        p.setdefault("kind", "agent")
        p.setdefault("endowment", 0)

    script: list = []
    for i, item in enumerate(raw.get("script", [])):
        if not isinstance(item, dict):
            raise ScenarioParseError(f"script item {i} must be an object")
        if "policy" in item:
            policy_raw = item["policy"]
            if not isinstance(policy_raw, dict):
                raise ScenarioParseError(f"script item {i}: policy must be an object")
            script.append(PolicyBlock.from_dict(policy_raw))
        elif "command" in item:
            actor = item.get("actor")
            if not isinstance(actor, str) or not actor:
                raise ScenarioParseError(f"script item {i}: actor required")
            if not isinstance(item["command"], dict):
                raise ScenarioParseError(f"script item {i}: command must be an object")
            expect = item.get("expect_error")
            if expect is not None and not isinstance(expect, str):
                raise ScenarioParseError(f"script item {i}: expect_error must be a string")
            script.append(ScriptAction(actor, item["command"], expect,
                                       str(item.get("note", ""))))
        else:
            raise ScenarioParseError(f"script item {i} needs a command or a policy")

    return Scenario(name=name, seed=seed, participants=participants,
                    script=script, source_path=source_path)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path} is not valid JSON: {exc}") from None
    return parse_scenario(raw, source_path=str(path))
