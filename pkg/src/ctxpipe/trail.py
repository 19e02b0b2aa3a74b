"""Hash-chained, append-only audit trail.

One line-delimited file per pipeline, one event per line. Each event's
digest covers the previous event's digest plus the full event envelope
(sequence, timestamp, pipeline id, kind, payload), so flipping any byte
anywhere in the file breaks verification at that event. The genesis
event chains from 32 zero bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .common import canonical_json

GENESIS_DIGEST = "00" * 32

_EVENT_KEYS = {
    "digest",
    "kind",
    "payload",
    "pipeline_id",
    "prev_digest",
    "seq",
    "timestamp",
}


def compute_digest(
    prev_digest: str,
    seq: int,
    timestamp: str,
    pipeline_id: str,
    kind: str,
    payload: dict[str, Any],
) -> str:
    body = canonical_json(
        {
            "kind": kind,
            "payload": payload,
            "pipeline_id": pipeline_id,
            "seq": seq,
            "timestamp": timestamp,
        }
    )
    return hashlib.sha256(bytes.fromhex(prev_digest) + body.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TrailEvent:
    seq: int
    timestamp: str
    pipeline_id: str
    kind: str
    payload: dict[str, Any]
    prev_digest: str
    digest: str

    def to_line(self) -> str:
        return canonical_json(
            {
                "digest": self.digest,
                "kind": self.kind,
                "payload": self.payload,
                "pipeline_id": self.pipeline_id,
                "prev_digest": self.prev_digest,
                "seq": self.seq,
                "timestamp": self.timestamp,
            }
        )


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    at_seq: Optional[int] = None
    reason: str = ""

    @classmethod
    def passed(cls) -> "VerifyResult":
        return cls(ok=True)

    @classmethod
    def broken(cls, at_seq: int, reason: str) -> "VerifyResult":
        return cls(ok=False, at_seq=at_seq, reason=reason)

    def render(self) -> str:
        if self.ok:
            return "ok"
        return f"broken at seq {self.at_seq}: {self.reason}"


class Trail:
    """File-backed event log for one pipeline."""

    def __init__(self, path: Path, pipeline_id: str) -> None:
        self.path = path
        self.pipeline_id = pipeline_id

    # -- write ----------------------------------------------------------

    def append(self, kind: str, payload: dict[str, Any], timestamp: str) -> TrailEvent:
        """Append one event, fsynced before return.

        The caller must persist dependent state only after this returns;
        a storage failure here aborts the mutation.
        """
        last = self._last_event()
        seq = (last.seq if last else 0) + 1
        prev = last.digest if last else GENESIS_DIGEST
        event = TrailEvent(
            seq=seq,
            timestamp=timestamp,
            pipeline_id=self.pipeline_id,
            kind=kind,
            payload=payload,
            prev_digest=prev,
            digest=compute_digest(prev, seq, timestamp, self.pipeline_id, kind, payload),
        )
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(event.to_line() + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        return event

    # -- read -------------------------------------------------------------

    def _raw_lines(self) -> list[str]:
        if not self.path.exists():
            return []
        text = self.path.read_text(encoding="utf-8")
        return [line for line in text.splitlines() if line.strip()]

    def _last_event(self) -> Optional[TrailEvent]:
        lines = self._raw_lines()
        if not lines:
            return None
        return self._parse_line(lines[-1], len(lines))

    @staticmethod
    def _parse_line(line: str, lineno: int) -> TrailEvent:
        raw = json.loads(line)
        return TrailEvent(
            seq=raw["seq"],
            timestamp=raw["timestamp"],
            pipeline_id=raw["pipeline_id"],
            kind=raw["kind"],
            payload=raw["payload"],
            prev_digest=raw["prev_digest"],
            digest=raw["digest"],
        )

    def events(self) -> list[TrailEvent]:
        """Parse all events; assumes a well-formed trail (see verify)."""
        return [
            self._parse_line(line, i + 1) for i, line in enumerate(self._raw_lines())
        ]

    # -- verification ------------------------------------------------------

    def verify(self) -> VerifyResult:
        """Recompute the digest chain; report the first broken event.

        An unparseable or malformed line is reported at its line position,
        which equals the event seq in any untampered trail.
        """
        prev = GENESIS_DIGEST
        for i, line in enumerate(self._raw_lines(), start=1):
            try:
                raw = json.loads(line)
            except json.JSONDecodeError:
                return VerifyResult.broken(i, "event line is not parseable")
            if not isinstance(raw, dict) or set(raw.keys()) != _EVENT_KEYS:
                return VerifyResult.broken(i, "event keys do not match the schema")
            if raw["seq"] != i:
                return VerifyResult.broken(i, f"seq {raw['seq']!r} breaks gapless order")
            if raw["pipeline_id"] != self.pipeline_id:
                return VerifyResult.broken(i, "event belongs to another pipeline")
            if raw["prev_digest"] != prev:
                return VerifyResult.broken(i, "prev_digest does not chain")
            if not isinstance(raw["payload"], dict):
                return VerifyResult.broken(i, "payload must be a map")
            expected = compute_digest(
                raw["prev_digest"],
                raw["seq"],
                raw["timestamp"],
                raw["pipeline_id"],
                raw["kind"],
                raw["payload"],
            )
            if raw["digest"] != expected:
                return VerifyResult.broken(i, "digest does not match event content")
            prev = raw["digest"]
        return VerifyResult.passed()

    # -- rendering ----------------------------------------------------------

    def render(self) -> str:
        """Human-readable chronology, one line per event; format is stable.

        A tampered trail still renders: unreadable lines are marked in
        place so the break point stays visible next to the verify status.
        """
        raw = self._raw_lines()
        check = self.verify()
        lines = [
            f"AUDIT TRAIL {self.pipeline_id}",
            f"events: {len(raw)}",
            f"chain: {check.render()}",
            "",
        ]
        for i, line in enumerate(raw, start=1):
            try:
                ev = self._parse_line(line, i)
            except (json.JSONDecodeError, KeyError, TypeError):
                lines.append(f"{i:>4}  <unreadable event line>")
                continue
            lines.append(
                f"{ev.seq:>4}  {ev.timestamp}  {ev.kind:<16} {_summarize(ev)}"
            )
        return "\n".join(lines) + "\n"


def _summarize(ev: TrailEvent) -> str:
    p = ev.payload
    if ev.kind == "PipelineCreated":
        return f"pipeline {p.get('pipeline_id')} created (scale={p.get('scale')})"
    if ev.kind == "PackageAttached":
        return f"package {p.get('package_id')} attached"
    if ev.kind == "StageBegun":
        tool = (p.get("tool") or {}).get("name")
        return (
            f"{p.get('stage')} begun on {p.get('branch_id')} "
            f"(tool={tool}, package={p.get('package_id')}, record={p.get('record_id')})"
        )
    if ev.kind == "StageCompleted":
        suffix = ""
        if p.get("patterns"):
            suffix = f", patterns={','.join(p['patterns'])}"
        return f"record {p.get('record_id')} completed (artifact={p.get('output_artifact')}{suffix})"
    if ev.kind == "StageWaived":
        return (
            f"{p.get('stage')} waived on {p.get('branch_id')} "
            f"(record={p.get('record_id')}): {p.get('waiver_reason')}"
        )
    if ev.kind == "FindingRecorded":
        return (
            f"finding {p.get('finding_id')} on {p.get('branch_id')}: "
            f"severity={p.get('severity')}, category={p.get('category')}"
        )
    if ev.kind == "IterationRouted":
        mode = "reopened" if p.get("reopened") else "joined open record"
        return (
            f"finding {p.get('finding_id')} routed to {p.get('target_stage')} "
            f"(record={p.get('record_id')}, {mode})"
        )
    if ev.kind == "BranchCreated":
        return (
            f"branch {p.get('branch_id')} created from {p.get('parent')} "
            f"(design={p.get('design_record_id')})"
        )
    if ev.kind == "PipelineClosed":
        warnings = p.get("warnings") or []
        if not warnings:
            return "pipeline closed (no warnings)"
        codes = ", ".join(w.get("code", "?") for w in warnings)
        return f"pipeline closed (warnings: {codes})"
    return canonical_json(p)
