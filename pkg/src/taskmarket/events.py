"""Append-only event log: the kernel's sole persistence format.

Two line types share one JSON-lines stream:

  {"seq":N,"at":N,"actor":"...","command":{"type":"...", ...}}
  {"entry":{"seq":M,"kind":"...","debit":"...","credit":"...","amount":A,
            "task":T,"skill":S},"event_seq":N}

Command lines are authoritative: replaying them from an empty kernel
reproduces the state exactly. Entry lines are the ledger's audit trail,
written immediately after the command that produced them so independent
tools can re-fold balances without running the kernel.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import CorruptLog


@dataclass
class Event:
    seq: int
    at: int
    actor: str
    command: dict

    def encode(self) -> str:
        return json.dumps(
            {"seq": self.seq, "at": self.at, "actor": self.actor, "command": self.command},
            separators=(",", ":"))

    def to_dict(self) -> dict:
        return {"seq": self.seq, "at": self.at, "actor": self.actor, "command": self.command}


def encode_entry(entry: dict, event_seq: int) -> str:
    return json.dumps({"entry": entry, "event_seq": event_seq}, separators=(",", ":"))


class EventLog:
    """In-memory log with optional write-through to a JSONL file."""

    def __init__(self, path: str | Path | None = None):
        self.lines: list[str] = []
        self.events: list[Event] = []
        self._handle = None
        if path is not None:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = open(path, "a", encoding="utf-8")

    def append(self, event: Event, entries: list[dict]) -> None:
        lines = [event.encode()]
        lines.extend(encode_entry(entry, event.seq) for entry in entries)
        self.lines.extend(lines)
        self.events.append(event)
        if self._handle is not None:
            self._handle.write("\n".join(lines) + "\n")
            self._handle.flush()
            os.fsync(self._handle.fileno())

    def events_from(self, seq: int) -> list[Event]:
        return [e for e in self.events if e.seq >= seq]

    def dump(self) -> str:
        return "".join(line + "\n" for line in self.lines)

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def parse_log_lines(lines) -> tuple[list[Event], list[dict]]:
    """Decode a log into (events, entry records), validating gaplessness."""
    events: list[Event] = []
    entries: list[dict] = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptLog(f"line {lineno}: undecodable ({exc})") from None
        if not isinstance(record, dict):
            raise CorruptLog(f"line {lineno}: not an object")
        if "entry" in record:
            entry = record["entry"]
            if not isinstance(entry, dict) or "seq" not in entry:
                raise CorruptLog(f"line {lineno}: malformed entry record")
            if entry["seq"] != len(entries) + 1:
                raise CorruptLog(
                    f"line {lineno}: entry seq {entry['seq']}, expected {len(entries) + 1}")
            if record.get("event_seq") != (events[-1].seq if events else None):
                raise CorruptLog(f"line {lineno}: entry not attached to preceding event")
            entries.append({"entry": entry, "event_seq": record["event_seq"]})
        elif "command" in record:
            try:
                event = Event(record["seq"], record["at"], record["actor"], record["command"])
            except KeyError as exc:
                raise CorruptLog(f"line {lineno}: missing {exc}") from None
            if event.seq != len(events) + 1:
                raise CorruptLog(f"line {lineno}: event seq {event.seq}, expected {len(events) + 1}")
            if not isinstance(event.command, dict):
                raise CorruptLog(f"line {lineno}: command is not an object")
            events.append(event)
        else:
            raise CorruptLog(f"line {lineno}: neither event nor entry")
    return events, entries


def read_log(path: str | Path) -> tuple[list[Event], list[dict]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorruptLog(f"cannot read log: {exc}") from None
    return parse_log_lines(text.splitlines())
