"""Interaction-record datasets and the quality aggregation tables.

A dataset is a list of extraction records, one per human-AI interaction:
what was asked, what was produced, which stages ran, what context package
accompanied the prompt, and how the output fared on the four-level quality
rubric. This module parses record files, lints interaction boundaries, and
computes the standard aggregations (quality by tool, authority type,
package size, stage presence).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Any, Callable, Optional

from .common import ParseIssue, Stage, parse_pipeline_id, parse_stage, round_half_up
from .errors import InputError
from .packages import (
    ContextRole,
    SizeClass,
    SourceKind,
    parse_role,
    parse_source_kind,
    size_class_for,
)


class QualityOutcome(str, Enum):
    """The four-level quality rubric."""

    SUCCESS_NO_ITERATION = "success_no_iteration"
    SUCCESS_WITH_ITERATION = "success_with_iteration"
    PARTIAL = "partial"
    FAILED = "failed"

    @property
    def label(self) -> str:
        return _OUTCOME_LABELS[self]

    @property
    def is_success(self) -> bool:
        return self in (
            QualityOutcome.SUCCESS_NO_ITERATION,
            QualityOutcome.SUCCESS_WITH_ITERATION,
        )


_OUTCOME_LABELS = {
    QualityOutcome.SUCCESS_NO_ITERATION: "SUCCESS with no iteration",
    QualityOutcome.SUCCESS_WITH_ITERATION: "SUCCESS with iteration",
    QualityOutcome.PARTIAL: "PARTIAL",
    QualityOutcome.FAILED: "FAILED",
}


def parse_outcome(text: str) -> QualityOutcome:
    """Parse an outcome string, tolerating punctuation and case variants.

    "SUCCESS - no iteration", "success with no iteration", and the
    canonical labels all parse; anything else raises.
    """
    cleaned = " ".join(
        "".join(ch if ch.isalnum() else " " for ch in text.lower()).split()
    )
    if cleaned in ("partial", "failed"):
        return QualityOutcome(cleaned)
    if "success" in cleaned:
        if "no iteration" in cleaned:
            return QualityOutcome.SUCCESS_NO_ITERATION
        if "iteration" in cleaned:
            return QualityOutcome.SUCCESS_WITH_ITERATION
    raise InputError("BAD_OUTCOME", f"unknown quality outcome: {text!r}")


@dataclass(frozen=True)
class PackageRow:
    priority: int
    role: ContextRole
    source_kind: SourceKind
    file_name: str
    description: str


@dataclass(frozen=True)
class DateRange:
    start: date
    end: date

    def overlaps(self, other: "DateRange") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass(frozen=True)
class InteractionRecord:
    number: int
    date_range: DateRange
    title: str
    pipeline_id: str
    tools: tuple[str, ...]
    stages: frozenset[Stage]
    context_package: tuple[PackageRow, ...]
    asked: str
    produced: str
    outcome: QualityOutcome
    evidence: tuple[str, ...]
    patterns: Optional[str] = None
    iterations: Optional[int] = None
    chain: bool = False
    total_tokens: Optional[int] = None

    @property
    def effective_iterations(self) -> tuple[int, bool]:
        """(iterations, exact?) with conservative inference when unrecorded.

        A first-pass success is one iteration by definition. Other outcomes
        without a recorded count contribute their minimum possible value
        and flag the average as a lower bound.
        """
        if self.iterations is not None:
            return self.iterations, True
        if self.outcome is QualityOutcome.SUCCESS_NO_ITERATION:
            return 1, True
        if self.outcome is QualityOutcome.SUCCESS_WITH_ITERATION:
            return 2, False
        return 1, False


class DatasetParseError(InputError):
    """A dataset failed to parse; ``issues`` lists every problem."""

    def __init__(self, issues: list[ParseIssue]) -> None:
        summary = "; ".join(issue.render() for issue in issues[:20])
        if len(issues) > 20:
            summary += f"; and {len(issues) - 20} more"
        super().__init__("BAD_DATASET", f"invalid dataset: {summary}")
        self.issues = issues


_REQUIRED_FIELDS = (
    "number",
    "date_range",
    "title",
    "pipeline_id",
    "tools",
    "stages",
    "context_package",
    "asked",
    "produced",
    "outcome",
    "evidence",
)


def _parse_record(raw: dict[str, Any], label: str, issues: list[ParseIssue]) -> Optional[InteractionRecord]:
    problems_before = len(issues)

    def bad(code: str, message: str) -> None:
        issues.append(ParseIssue(code, f"record {label}: {message}"))

    for field_name in _REQUIRED_FIELDS:
        if field_name not in raw or raw[field_name] in (None, "", []):
            bad("MISSING_FIELD", f"field {field_name!r} is missing or empty")
    if len(issues) > problems_before:
        return None

    number = raw["number"]
    if not isinstance(number, int) or isinstance(number, bool) or number < 1:
        bad("BAD_NUMBER", f"number must be a positive integer, got {number!r}")

    date_range: Optional[DateRange] = None
    dr = raw["date_range"]
    if isinstance(dr, dict) and "start" in dr and "end" in dr:
        try:
            date_range = DateRange(
                start=date.fromisoformat(str(dr["start"])),
                end=date.fromisoformat(str(dr["end"])),
            )
            if date_range.end < date_range.start:
                bad("BAD_DATE_RANGE", "end date precedes start date")
        except ValueError as exc:
            bad("BAD_DATE_RANGE", str(exc))
    else:
        bad("BAD_DATE_RANGE", "date_range must be {start, end} ISO dates")

    try:
        parse_pipeline_id(str(raw["pipeline_id"]))
    except ValueError as exc:
        bad("BAD_PIPELINE_ID", str(exc))

    tools = raw["tools"]
    if not isinstance(tools, list) or not all(isinstance(t, str) and t for t in tools):
        bad("BAD_TOOLS", "tools must be a nonempty list of names")
        tools = []

    stages: set[Stage] = set()
    raw_stages = raw["stages"] if isinstance(raw["stages"], list) else []
    if not isinstance(raw["stages"], list):
        bad("BAD_STAGES", "stages must be a list")
    for s in raw_stages:
        try:
            stages.add(parse_stage(str(s)))
        except ValueError as exc:
            bad("BAD_STAGES", str(exc))

    rows: list[PackageRow] = []
    raw_rows = raw["context_package"] if isinstance(raw["context_package"], list) else []
    if not isinstance(raw["context_package"], list):
        bad("BAD_PACKAGE_ROW", "context_package must be a list of rows")
    for i, r in enumerate(raw_rows):
        if not isinstance(r, dict):
            bad("BAD_PACKAGE_ROW", f"context_package[{i}] must be an object")
            continue
        try:
            rows.append(
                PackageRow(
                    priority=int(r["priority"]),
                    role=parse_role(str(r["role"])),
                    source_kind=parse_source_kind(str(r["type"])),
                    file_name=str(r.get("file_name", "")),
                    description=str(r.get("description", "")),
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            bad("BAD_PACKAGE_ROW", f"context_package[{i}]: {exc}")
        except InputError as exc:
            bad("BAD_PACKAGE_ROW", f"context_package[{i}]: {exc.message}")

    outcome: Optional[QualityOutcome] = None
    try:
        outcome = parse_outcome(str(raw["outcome"]))
    except InputError as exc:
        bad("BAD_OUTCOME", exc.message)

    evidence = raw["evidence"]
    if not isinstance(evidence, list) or not all(isinstance(e, str) for e in evidence):
        bad("BAD_EVIDENCE", "evidence must be a list of text fragments")
        evidence = []
    elif not 2 <= len(evidence) <= 4:
        bad("BAD_EVIDENCE", f"evidence needs 2-4 fragments, got {len(evidence)}")

    iterations = raw.get("iterations")
    if iterations is not None:
        if not isinstance(iterations, int) or isinstance(iterations, bool) or iterations < 1:
            bad("BAD_ITERATIONS", f"iterations must be a positive integer, got {iterations!r}")
        elif outcome is QualityOutcome.SUCCESS_NO_ITERATION and iterations != 1:
            bad("BAD_ITERATIONS", "a first-pass success has exactly one iteration")

    total_tokens = raw.get("total_tokens")
    if total_tokens is not None and (
        not isinstance(total_tokens, int)
        or isinstance(total_tokens, bool)
        or total_tokens < 0
    ):
        bad("BAD_TOKENS", f"total_tokens must be a nonnegative integer, got {total_tokens!r}")

    patterns = raw.get("patterns")
    if patterns is not None and not isinstance(patterns, str):
        bad("BAD_PATTERNS", "patterns must be text when present")

    if len(issues) > problems_before:
        return None
    return InteractionRecord(
        number=number,
        date_range=date_range,  # type: ignore[arg-type]
        title=str(raw["title"]),
        pipeline_id=str(raw["pipeline_id"]),
        tools=tuple(tools),
        stages=frozenset(stages),
        context_package=tuple(rows),
        asked=str(raw["asked"]),
        produced=str(raw["produced"]),
        outcome=outcome,  # type: ignore[arg-type]
        evidence=tuple(evidence),
        patterns=patterns,
        iterations=iterations,
        chain=bool(raw.get("chain", False)),
        total_tokens=total_tokens,
    )


def parse_dataset(text: str) -> list[InteractionRecord]:
    """Parse a dataset document: a JSON array, one object, or JSON lines.

    Raises:
        DatasetParseError: listing every malformed record by number.
    """
    issues: list[ParseIssue] = []
    raws: list[dict[str, Any]] = []
    stripped = text.strip()
    if not stripped:
        raise DatasetParseError([ParseIssue("EMPTY_DATASET", "no records in input")])
    try:
        doc = json.loads(stripped)
        if isinstance(doc, list):
            raws = doc
        elif isinstance(doc, dict) and isinstance(doc.get("records"), list):
            raws = doc["records"]
        elif isinstance(doc, dict):
            raws = [doc]
        else:
            raise DatasetParseError(
                [ParseIssue("BAD_JSON", "dataset must be an array or object")]
            )
    except json.JSONDecodeError:
        for no, line in enumerate(stripped.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raws.append(json.loads(line))
            except json.JSONDecodeError as exc:
                issues.append(ParseIssue("BAD_JSON", str(exc), line=no))
        if issues:
            raise DatasetParseError(issues)

    records: list[InteractionRecord] = []
    for i, raw in enumerate(raws):
        if not isinstance(raw, dict):
            issues.append(ParseIssue("BAD_RECORD", f"entry {i} is not an object"))
            continue
        label = str(raw.get("number", f"at index {i}"))
        record = _parse_record(raw, label, issues)
        if record is not None:
            records.append(record)
    if issues:
        raise DatasetParseError(issues)
    return records


def boundary_lints(records: list[InteractionRecord]) -> list[ParseIssue]:
    """Flag likely duplicate interactions.

    Same pipeline, same title, overlapping dates suggests one interaction
    recorded twice rather than a legitimate continuation (a continuation
    is a new interaction, typically in a new session with fresh dates).
    """
    lints: list[ParseIssue] = []
    for i, a in enumerate(records):
        for b in records[i + 1 :]:
            if (
                a.pipeline_id == b.pipeline_id
                and a.title == b.title
                and a.date_range.overlaps(b.date_range)
            ):
                lints.append(
                    ParseIssue(
                        "DUPLICATE_SUSPECT",
                        f"records {a.number} and {b.number} share pipeline "
                        f"{a.pipeline_id}, title, and overlapping dates",
                    )
                )
    return lints


def record_to_dict(r: InteractionRecord) -> dict[str, Any]:
    return {
        "asked": r.asked,
        "chain": r.chain,
        "context_package": [
            {
                "description": row.description,
                "file_name": row.file_name,
                "priority": row.priority,
                "role": row.role.value,
                "type": row.source_kind.value,
            }
            for row in r.context_package
        ],
        "date_range": {
            "end": r.date_range.end.isoformat(),
            "start": r.date_range.start.isoformat(),
        },
        "evidence": list(r.evidence),
        "iterations": r.iterations,
        "number": r.number,
        "outcome": r.outcome.label,
        "patterns": r.patterns,
        "pipeline_id": r.pipeline_id,
        "produced": r.produced,
        "stages": sorted(s.value for s in r.stages),
        "title": r.title,
        "tools": list(r.tools),
        "total_tokens": r.total_tokens,
    }


def serialize_dataset(records: list[InteractionRecord]) -> str:
    return json.dumps([record_to_dict(r) for r in records], indent=2, sort_keys=True) + "\n"


# --- aggregations ----------------------------------------------------------


@dataclass(frozen=True)
class QualityRow:
    group: str
    total: int
    first_pass: int
    iterated: int
    partial: int
    failed: int
    first_pass_pct: float
    final_success_pct: float
    avg_iterations: float
    avg_is_lower_bound: bool


@dataclass(frozen=True)
class QualityTable:
    rows: tuple[QualityRow, ...]


def _pct(part: int, whole: int, places: int = 1) -> float:
    return float(round_half_up(100.0 * part / whole, places))


def _quality_row(group: str, records: list[InteractionRecord]) -> QualityRow:
    total = len(records)
    first_pass = sum(
        1 for r in records if r.outcome is QualityOutcome.SUCCESS_NO_ITERATION
    )
    iterated = sum(
        1 for r in records if r.outcome is QualityOutcome.SUCCESS_WITH_ITERATION
    )
    partial = sum(1 for r in records if r.outcome is QualityOutcome.PARTIAL)
    failed = sum(1 for r in records if r.outcome is QualityOutcome.FAILED)
    pairs = [r.effective_iterations for r in records]
    avg = sum(n for n, _ in pairs) / total
    return QualityRow(
        group=group,
        total=total,
        first_pass=first_pass,
        iterated=iterated,
        partial=partial,
        failed=failed,
        first_pass_pct=_pct(first_pass, total),
        final_success_pct=_pct(first_pass + iterated, total),
        avg_iterations=float(round_half_up(avg, 1)),
        avg_is_lower_bound=any(not exact for _, exact in pairs),
    )


def aggregate_quality(
    records: list[InteractionRecord], group_by: str = "all"
) -> QualityTable:
    """Quality outcome counts and percentages, overall or per primary tool.

    A record's group is its first-listed tool, so groups partition the
    record set. Percentages and averages are rounded half-up to one
    decimal.

    Raises:
        InputError: on an empty record list or unknown group_by.
    """
    if not records:
        raise InputError("EMPTY_DATASET", "cannot aggregate zero records")
    if group_by not in ("all", "tool"):
        raise InputError("BAD_GROUPING", f"group_by must be all|tool, got {group_by!r}")
    rows: list[QualityRow] = []
    if group_by == "tool":
        groups: dict[str, list[InteractionRecord]] = {}
        for r in records:
            groups.setdefault(r.tools[0], []).append(r)
        for name in sorted(groups):
            rows.append(_quality_row(name, groups[name]))
    rows.append(_quality_row("overall", list(records)))
    return QualityTable(rows=tuple(rows))


class AuthorityType(str, Enum):
    FILE_BASED = "file_based"
    VERBAL = "verbal"
    ABSENT = "absent"

    @property
    def label(self) -> str:
        return "".join(part.capitalize() for part in self.value.split("_"))


def authority_type_of(record: InteractionRecord) -> AuthorityType:
    """Strongest authority mechanism present in the record's package rows."""
    authority_rows = [
        row for row in record.context_package if row.role is ContextRole.AUTHORITY
    ]
    if any(row.source_kind is SourceKind.FILE for row in authority_rows):
        return AuthorityType.FILE_BASED
    if authority_rows:
        return AuthorityType.VERBAL
    return AuthorityType.ABSENT


@dataclass(frozen=True)
class AuthorityRow:
    authority: AuthorityType
    total: int
    first_pass: int
    first_pass_pct: float


def authority_breakdown(records: list[InteractionRecord]) -> tuple[AuthorityRow, ...]:
    """First-pass rate by authority type; every record lands in one row."""
    rows: list[AuthorityRow] = []
    for kind in AuthorityType:
        subset = [r for r in records if authority_type_of(r) is kind]
        if not subset:
            continue
        first_pass = sum(
            1 for r in subset if r.outcome is QualityOutcome.SUCCESS_NO_ITERATION
        )
        rows.append(
            AuthorityRow(
                authority=kind,
                total=len(subset),
                first_pass=first_pass,
                first_pass_pct=_pct(first_pass, len(subset), places=0),
            )
        )
    return tuple(rows)


@dataclass(frozen=True)
class SizeRow:
    size: SizeClass
    total: int
    avg_iterations: float
    first_pass_pct: float
    avg_is_lower_bound: bool


TokenLookup = Callable[[InteractionRecord], Optional[int]]


def default_token_lookup(record: InteractionRecord) -> Optional[int]:
    return record.total_tokens


def size_breakdown(
    records: list[InteractionRecord], token_lookup: TokenLookup = default_token_lookup
) -> tuple[SizeRow, ...]:
    """Iteration load and first-pass rate by package size class.

    Records whose token total is unknown to ``token_lookup`` are left out;
    empty classes are omitted.
    """
    buckets: dict[SizeClass, list[InteractionRecord]] = {}
    for r in records:
        tokens = token_lookup(r)
        if tokens is None:
            continue
        buckets.setdefault(size_class_for(tokens), []).append(r)
    rows: list[SizeRow] = []
    for size in SizeClass:
        subset = buckets.get(size)
        if not subset:
            continue
        pairs = [r.effective_iterations for r in subset]
        first_pass = sum(
            1 for r in subset if r.outcome is QualityOutcome.SUCCESS_NO_ITERATION
        )
        rows.append(
            SizeRow(
                size=size,
                total=len(subset),
                avg_iterations=float(round_half_up(sum(n for n, _ in pairs) / len(subset), 1)),
                first_pass_pct=_pct(first_pass, len(subset), places=0),
                avg_is_lower_bound=any(not exact for _, exact in pairs),
            )
        )
    return tuple(rows)


def stage_presence(records: list[InteractionRecord]) -> dict[Stage, float]:
    """Percentage of records whose stage set contains each stage.

    Sums can exceed 100 because one interaction can span several stages.

    Raises:
        InputError: on an empty record list.
    """
    if not records:
        raise InputError("EMPTY_DATASET", "cannot aggregate zero records")
    return {
        stage: _pct(sum(1 for r in records if stage in r.stages), len(records))
        for stage in Stage
    }
