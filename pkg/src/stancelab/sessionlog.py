"""Event-sourced session persistence.

Every transition is one record (event, beliefs, desires, intention, action)
appended to a JSONL file with canonical key order and float formatting, so a
log replays bit-exact and behavior traces hash identically across platforms.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional

from .canonical import content_hash, canonical_json
from .model import (
    BeliefBase,
    Desire,
    Event,
    EventKind,
    Intention,
)


class SessionLogError(Exception):
    code = "log_error"


class SeqGapError(SessionLogError):
    code = "seq_gap"


class ClosedLogError(SessionLogError):
    code = "closed_session"


class ReplayDivergenceError(SessionLogError):
    code = "replay_divergence"

    def __init__(self, seq: int, fld: str, message: str = ""):
        self.seq = seq
        self.field = fld
        super().__init__(message or f"replay diverged at seq={seq}, field {fld!r}")


class InvarianceViolationError(SessionLogError):
    code = "invariance_violation"


class IncompleteFrameSetError(SessionLogError):
    code = "incomplete_frame_set"


@dataclass(frozen=True)
class LogRecord:
    seq: int
    event: Event
    beliefs: BeliefBase
    desires: tuple[Desire, ...]
    intention: Optional[Intention]
    action: Optional[dict]  # {"kind": move|chat, "params": {...}, "rationale_tags": [...]}

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "event": self.event.to_dict(),
            "beliefs": self.beliefs.to_list(),
            "desires": [d.to_dict() for d in self.desires],
            "intention": self.intention.to_dict() if self.intention else None,
            "action": self.action,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LogRecord":
        return cls(
            seq=data["seq"],
            event=Event.from_dict(data["event"]),
            beliefs=BeliefBase.from_list(data["beliefs"]),
            desires=tuple(Desire.from_dict(d) for d in data["desires"]),
            intention=Intention.from_dict(data["intention"]) if data["intention"] else None,
            action=data["action"],
        )


class SessionLog:
    """Append-only record store; optionally backed by a JSONL file."""

    def __init__(self, path: Optional[Path] = None, fsync: bool = False):
        self.path = Path(path) if path else None
        self.fsync = fsync
        self.records: list[LogRecord] = []
        self.lines: list[str] = []
        self._closed = False
        self._fh = None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "w", encoding="utf-8")

    def append(self, record: LogRecord) -> None:
        if self._closed:
            raise ClosedLogError("cannot append to a closed session log")
        expect = self.records[-1].seq + 1 if self.records else 0
        if record.seq != expect:
            raise SeqGapError(f"expected seq {expect}, got {record.seq}")
        line = canonical_json(record.to_dict())
        self.records.append(record)
        self.lines.append(line)
        if self._fh:
            self._fh.write(line + "\n")
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None
        self._closed = True

    @property
    def closed(self) -> bool:
        return self._closed


def read_log(path: "str | Path") -> list[LogRecord]:
    return [LogRecord.from_dict(d) for d in read_log_dicts(path)]


def read_log_dicts(path: "str | Path") -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SessionLogError(f"log line {lineno} is not valid JSON: {exc.msg}")
    return out


# ---------------------------------------------------------------------------
# Behavior traces
# ---------------------------------------------------------------------------

POSE_SAMPLE_HZ = 1.0
_SAMPLE_EPS = 1e-6


@dataclass(frozen=True)
class BehaviorTrace:
    """Frame-independent record of what the robot did: actions plus 1 Hz poses."""

    entries: tuple[tuple[float, str, dict], ...]
    pose_samples: tuple[tuple[float, list[float]], ...]

    @property
    def hash(self) -> str:
        return content_hash(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "entries": [{"t": t, "action": a, "params": p} for t, a, p in self.entries],
            "pose_samples": [{"t": t, "pose": pose} for t, pose in self.pose_samples],
        }

    @classmethod
    def from_records(cls, records: Iterable[LogRecord]) -> "BehaviorTrace":
        entries = []
        samples = []
        for record in records:
            if record.action is not None:
                entries.append((record.event.t, record.action["kind"],
                                record.action["params"]))
            if record.event.kind in (EventKind.TICK, EventKind.NAV_PROGRESS,
                                     EventKind.NAV_GOAL_REACHED):
                t = record.event.t
                if abs(t / POSE_SAMPLE_HZ - round(t / POSE_SAMPLE_HZ)) < _SAMPLE_EPS:
                    samples.append((t, list(record.event.payload["pose"])))
        return cls(entries=tuple(entries), pose_samples=tuple(samples))


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplayResult:
    records: tuple[LogRecord, ...]
    trace: BehaviorTrace

    @property
    def final_beliefs(self) -> BeliefBase:
        return self.records[-1].beliefs

    @property
    def final_record(self) -> LogRecord:
        return self.records[-1]


def _first_divergent_field(stored: Any, computed: Any, path: str = "") -> str:
    if isinstance(stored, dict) and isinstance(computed, dict):
        for key in sorted(set(stored) | set(computed)):
            if stored.get(key) != computed.get(key):
                return _first_divergent_field(stored.get(key), computed.get(key),
                                              f"{path}.{key}" if path else key)
        return path or "<record>"
    if isinstance(stored, list) and isinstance(computed, list):
        for i, (a, b) in enumerate(zip(stored, computed)):
            if a != b:
                return _first_divergent_field(a, b, f"{path}[{i}]")
        if len(stored) != len(computed):
            return f"{path}[{min(len(stored), len(computed))}]"
        return path or "<record>"
    return path or "<record>"


def replay(source: "str | Path | list[dict]") -> ReplayResult:
    """Re-execute a session log from its recorded config and compare every
    regenerated record byte-for-byte with the stored one.

    Raises ReplayDivergenceError naming the first diverging seq and field.
    """
    from .runtime import rebuild_from_log  # local import to avoid a module cycle

    stored = read_log_dicts(source) if isinstance(source, (str, Path)) else list(source)
    if not stored:
        return ReplayResult(records=(), trace=BehaviorTrace((), ()))

    runtime = rebuild_from_log(stored)
    stored_lines = [canonical_json(rec) for rec in stored]
    computed_lines = runtime.log.lines  # already canonical, written at append time

    for i, stored_line in enumerate(stored_lines):
        if i >= len(computed_lines):
            raise ReplayDivergenceError(stored[i].get("seq", i), "<missing>",
                                        f"replay produced no record for seq {i}")
        if computed_lines[i] != stored_line:
            fld = _first_divergent_field(stored[i], json.loads(computed_lines[i]))
            raise ReplayDivergenceError(stored[i].get("seq", i), fld)
    if len(computed_lines) > len(stored_lines):
        raise ReplayDivergenceError(
            len(stored_lines), "<extra>",
            f"replay produced {len(computed_lines) - len(stored_lines)} extra records")

    records = tuple(runtime.log.records)
    return ReplayResult(records=records, trace=BehaviorTrace.from_records(records))


# ---------------------------------------------------------------------------
# Stimulus export
# ---------------------------------------------------------------------------

FRAME_NAMES = ("agentive", "teleological", "mechanistic")


@dataclass(frozen=True)
class StimulusItem:
    scenario_id: str
    world: str
    command_script: tuple[str, ...]
    trace: BehaviorTrace
    transcripts: dict[str, tuple[dict, ...]]  # frame -> ordered utterance payloads
    viewpoints: tuple[str, ...] = ("plan", "front")

    @property
    def trace_hash(self) -> str:
        return self.trace.hash

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "world": self.world,
            "command_script": list(self.command_script),
            "trace_hash": self.trace_hash,
            "viewpoints": list(self.viewpoints),
            "frames": sorted(self.transcripts),
        }


def _session_header(records: list[LogRecord]) -> dict:
    if not records or records[0].event.kind is not EventKind.SESSION_START:
        raise SessionLogError("log has no session_start header record")
    return dict(records[0].event.payload)


def _stimuli(records: list[LogRecord]) -> list[tuple[float, str]]:
    return [(r.event.t, r.event.payload["text"]) for r in records
            if r.event.kind is EventKind.USER_UTTERANCE]


def _transcript(records: list[LogRecord]) -> tuple[dict, ...]:
    return tuple(dict(r.event.payload) | {"t": r.event.t} for r in records
                 if r.event.kind is EventKind.LLM_RESPONSE)


def export_stimuli(logs_by_frame: dict[str, list[LogRecord]],
                   scenario_id: str = "scenario") -> StimulusItem:
    """Bundle one trace with the per-frame transcripts of the same script.

    Refuses to export unless all three frames are present, share world, seed
    and command script, and hash to the same behavior trace.
    """
    missing = [f for f in FRAME_NAMES if f not in logs_by_frame]
    if missing:
        raise IncompleteFrameSetError(f"missing frames: {missing}")

    headers = {f: _session_header(r) for f, r in logs_by_frame.items()}
    reference = headers[FRAME_NAMES[0]]
    for f in FRAME_NAMES[1:]:
        for key in ("world", "seed", "engine"):
            if headers[f].get(key) != reference.get(key):
                raise InvarianceViolationError(
                    f"frame {f} was run with a different {key}")
    script = _stimuli(logs_by_frame[FRAME_NAMES[0]])
    for f in FRAME_NAMES[1:]:
        if _stimuli(logs_by_frame[f]) != script:
            raise InvarianceViolationError(f"frame {f} was run with a different script")

    traces = {f: BehaviorTrace.from_records(r) for f, r in logs_by_frame.items()}
    hashes = {f: t.hash for f, t in traces.items()}
    if len(set(hashes.values())) != 1:
        raise InvarianceViolationError(f"behavior traces differ across frames: {hashes}")

    return StimulusItem(
        scenario_id=scenario_id,
        world=reference["world"]["name"],
        command_script=tuple(text for _, text in script),
        trace=traces[FRAME_NAMES[0]],
        transcripts={f: _transcript(r) for f, r in logs_by_frame.items()},
    )


def write_stimulus_bundle(item: StimulusItem, directory: "str | Path") -> Path:
    """Write the documented bundle layout: metadata, trace, per-frame transcripts."""
    root = Path(directory)
    (root / "transcripts").mkdir(parents=True, exist_ok=True)
    (root / "metadata.json").write_text(canonical_json(item.to_dict()) + "\n")
    (root / "trace.json").write_text(canonical_json(item.trace.to_dict()) + "\n")
    for frame, transcript in item.transcripts.items():
        (root / "transcripts" / f"{frame}.json").write_text(
            canonical_json(list(transcript)) + "\n")
    return root
