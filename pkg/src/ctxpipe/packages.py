"""Role-typed context packages with priority conflict resolution.

A context package is the complete set of material handed to a tool when a
pipeline stage begins. Every element carries one of five roles; the roles
form a strict priority ladder, and when two elements give conflicting
direction the lower priority number wins. Equal priorities have no
ordering and escalate to the operator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Union

from .common import ParseIssue, Stage, parse_stage
from .errors import InputError


class ContextRole(str, Enum):
    AUTHORITY = "authority"
    EXEMPLAR = "exemplar"
    CONSTRAINT = "constraint"
    RUBRIC = "rubric"
    METADATA = "metadata"

    @property
    def label(self) -> str:
        return self.value.capitalize()

    @property
    def priority(self) -> int:
        return _PRIORITY[self]


_PRIORITY: dict[ContextRole, int] = {
    ContextRole.AUTHORITY: 1,
    ContextRole.EXEMPLAR: 2,
    ContextRole.CONSTRAINT: 3,
    ContextRole.RUBRIC: 4,
    ContextRole.METADATA: 5,
}


def priority_of(role: ContextRole) -> int:
    """Fixed priority rank of a role: Authority=1 down to Metadata=5."""
    return _PRIORITY[role]


def parse_role(text: str) -> ContextRole:
    try:
        return ContextRole(text.strip().lower())
    except ValueError:
        raise InputError("BAD_ROLE", f"unknown role: {text!r}") from None


class SourceKind(str, Enum):
    FILE = "file"
    VERBAL = "verbal"
    MEMORY = "memory"

    @property
    def label(self) -> str:
        return self.value.capitalize()


def parse_source_kind(text: str) -> SourceKind:
    try:
        return SourceKind(text.strip().lower())
    except ValueError:
        raise InputError("BAD_SOURCE_KIND", f"unknown source kind: {text!r}") from None


class AuthorityTag(str, Enum):
    """Markers that distinguish coexisting authority elements."""

    DESIGN_AUTHORITY = "design_authority"
    OPERATOR_AUTHORITY = "operator_authority"
    MASTER_REFERENCE = "master_reference"

    @property
    def label(self) -> str:
        return "".join(part.capitalize() for part in self.value.split("_"))


def parse_tag(text: str) -> AuthorityTag:
    try:
        return AuthorityTag(text.strip().lower())
    except ValueError:
        raise InputError("BAD_TAG", f"unknown authority tag: {text!r}") from None


@dataclass(frozen=True)
class ContextElement:
    """One item of context: a file, a verbal instruction, or tool memory."""

    element_id: str
    role: ContextRole
    source_kind: SourceKind
    label: str
    content_ref: str
    token_estimate: int = 0
    tags: frozenset[AuthorityTag] = field(default_factory=frozenset)
    reviewed: bool = False

    def __post_init__(self) -> None:
        if not self.element_id:
            raise InputError("BAD_ELEMENT_ID", "element_id must be non-empty")
        if self.token_estimate < 0:
            raise InputError(
                "BAD_TOKEN_ESTIMATE",
                f"token_estimate must be >= 0, got {self.token_estimate}",
            )
        if self.tags and self.role is not ContextRole.AUTHORITY:
            names = ", ".join(sorted(t.value for t in self.tags))
            raise InputError(
                "TAG_ROLE_MISMATCH",
                f"tags ({names}) are only valid on authority elements, "
                f"not {self.role.value}",
            )


@dataclass(frozen=True)
class ContextPackage:
    """An ordered collection of elements targeted at one pipeline stage."""

    package_id: str
    pipeline_id: str
    stage: Stage
    elements: tuple[ContextElement, ...]

    def __post_init__(self) -> None:
        if not self.package_id:
            raise InputError("BAD_PACKAGE_ID", "package_id must be non-empty")
        seen: set[str] = set()
        for el in self.elements:
            if el.element_id in seen:
                raise InputError(
                    "DUPLICATE_ELEMENT_ID",
                    f"element_id {el.element_id!r} appears more than once",
                )
            seen.add(el.element_id)


def total_tokens(pkg: ContextPackage) -> int:
    return sum(el.token_estimate for el in pkg.elements)


class ConflictOutcome(str, Enum):
    RESOLVED = "resolved"
    OPERATOR_ESCALATION = "operator_escalation"

    @property
    def label(self) -> str:
        return "".join(part.capitalize() for part in self.value.split("_"))


@dataclass(frozen=True)
class ConflictResolution:
    winner: Optional[str]
    loser: Optional[str]
    outcome: ConflictOutcome
    rationale: str


def resolve_conflict(a: ContextElement, b: ContextElement) -> ConflictResolution:
    """Resolve a declared conflict between two elements by role priority.

    The element whose role has the lower priority number wins. Equal
    priorities have no defined ordering, so the conflict escalates to the
    operator instead of being tie-broken silently.

    Raises:
        InputError: if both arguments are the same element.
    """
    if a.element_id == b.element_id:
        raise InputError(
            "SELF_CONFLICT", f"an element cannot conflict with itself: {a.element_id!r}"
        )
    pa, pb = priority_of(a.role), priority_of(b.role)
    if pa == pb:
        return ConflictResolution(
            winner=None,
            loser=None,
            outcome=ConflictOutcome.OPERATOR_ESCALATION,
            rationale=(
                f"{a.role.label} (priority {pa}) and {b.role.label} "
                f"(priority {pb}) rank equally; operator decision required"
            ),
        )
    win, lose = (a, b) if pa < pb else (b, a)
    return ConflictResolution(
        winner=win.element_id,
        loser=lose.element_id,
        outcome=ConflictOutcome.RESOLVED,
        rationale=(
            f"{win.role.label} (priority {priority_of(win.role)}) overrides "
            f"{lose.role.label} (priority {priority_of(lose.role)})"
        ),
    )


class FindingSeverity(str, Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"

    @property
    def label(self) -> str:
        return self.value.capitalize()

    @property
    def rank(self) -> int:
        return ("error", "warning", "info").index(self.value)


@dataclass(frozen=True)
class PackageFinding:
    severity: FindingSeverity
    code: str
    message: str


def validate_package(pkg: ContextPackage) -> list[PackageFinding]:
    """Lint a package for the failure modes that dominate in practice.

    Never raises; returns findings sorted by severity then code. Packages
    without a governing file-based authority are the leading source of
    downstream failures, so that lint is a Warning rather than an Info.
    """
    findings: list[PackageFinding] = []
    if not pkg.elements:
        findings.append(
            PackageFinding(
                FindingSeverity.ERROR, "NO_ELEMENTS", "package contains no elements"
            )
        )
    authorities = [el for el in pkg.elements if el.role is ContextRole.AUTHORITY]
    if not any(el.source_kind is SourceKind.FILE for el in authorities):
        if pkg.elements:
            findings.append(
                PackageFinding(
                    FindingSeverity.WARNING,
                    "NO_FILE_AUTHORITY",
                    "no file-based authority element governs this package",
                )
            )
    if authorities and all(el.source_kind is SourceKind.VERBAL for el in authorities):
        findings.append(
            PackageFinding(
                FindingSeverity.WARNING,
                "VERBAL_AUTHORITY",
                "authority exists only as verbal instruction; externalize it to a file",
            )
        )
    for el in pkg.elements:
        if el.source_kind is SourceKind.FILE and not el.reviewed:
            findings.append(
                PackageFinding(
                    FindingSeverity.INFO,
                    "UNTRUSTED_SOURCE",
                    f"file element {el.element_id!r} has not been reviewed; "
                    "treat source files as untrusted input",
                )
            )
    findings.sort(key=lambda f: (f.severity.rank, f.code))
    return findings


class SizeClass(str, Enum):
    MINIMAL = "minimal"
    MODERATE = "moderate"
    COMPREHENSIVE = "comprehensive"

    @property
    def label(self) -> str:
        return self.value.capitalize()


def size_class_for(total: int) -> SizeClass:
    """Classify a token total: <500 Minimal, 500-2000 Moderate, >2000 Comprehensive."""
    if total < 500:
        return SizeClass.MINIMAL
    if total <= 2000:
        return SizeClass.MODERATE
    return SizeClass.COMPREHENSIVE


def classify_size(pkg: ContextPackage) -> SizeClass:
    return size_class_for(total_tokens(pkg))


def estimate_tokens(content: Union[bytes, str]) -> int:
    """Approximate token count as ceil(bytes / 4); deterministic, tokenizer-free."""
    data = content.encode("utf-8") if isinstance(content, str) else content
    return math.ceil(len(data) / 4)


# --- manifest (de)serialization -------------------------------------------
#
# Canonical form: JSON, keys sorted alphabetically, two-space indent, all
# element fields explicit, trailing newline. Parsing accepts documents that
# omit optional fields; serializing always emits the canonical form, so
# canonical documents round-trip byte-identically.

_ELEMENT_REQUIRED = {"content_ref", "element_id", "label", "role", "source_kind"}
_ELEMENT_OPTIONAL = {"reviewed", "tags", "token_estimate"}
_PACKAGE_KEYS = {"elements", "package_id", "pipeline_id", "stage"}


class ManifestError(InputError):
    """A manifest failed to parse; ``issues`` lists every problem found."""

    def __init__(self, issues: list[ParseIssue]) -> None:
        summary = "; ".join(issue.render() for issue in issues)
        super().__init__("BAD_MANIFEST", f"invalid package manifest: {summary}")
        self.issues = issues


def _issue(issues: list[ParseIssue], code: str, message: str) -> None:
    issues.append(ParseIssue(code=code, message=message))


def parse_manifest(text: str) -> ContextPackage:
    """Parse a package manifest document.

    Raises:
        ManifestError: listing every structural problem in the document.
    """
    issues: list[ParseIssue] = []
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(
            [ParseIssue("BAD_JSON", str(exc), line=exc.lineno)]
        ) from None
    if not isinstance(doc, dict):
        raise ManifestError([ParseIssue("BAD_JSON", "manifest must be one object")])

    for key in sorted(_PACKAGE_KEYS - doc.keys()):
        _issue(issues, "MISSING_KEY", f"manifest lacks required key {key!r}")
    for key in sorted(doc.keys() - _PACKAGE_KEYS):
        _issue(issues, "UNKNOWN_KEY", f"manifest has unrecognized key {key!r}")

    stage: Stage = Stage.REVIEWER
    if "stage" in doc:
        try:
            stage = parse_stage(str(doc["stage"]))
        except ValueError as exc:
            _issue(issues, "BAD_STAGE", str(exc))

    elements: list[ContextElement] = []
    raw_elements = doc.get("elements", [])
    if not isinstance(raw_elements, list):
        _issue(issues, "BAD_ELEMENTS", "elements must be a list")
        raw_elements = []
    for i, raw in enumerate(raw_elements):
        if not isinstance(raw, dict):
            _issue(issues, "BAD_ELEMENT", f"elements[{i}] must be an object")
            continue
        missing = sorted(_ELEMENT_REQUIRED - raw.keys())
        for key in missing:
            _issue(issues, "MISSING_KEY", f"elements[{i}] lacks required key {key!r}")
        for key in sorted(raw.keys() - _ELEMENT_REQUIRED - _ELEMENT_OPTIONAL):
            _issue(issues, "UNKNOWN_KEY", f"elements[{i}] has unrecognized key {key!r}")
        if missing:
            continue
        try:
            role = parse_role(str(raw["role"]))
            kind = parse_source_kind(str(raw["source_kind"]))
            tags = frozenset(parse_tag(str(t)) for t in raw.get("tags", []))
            token_estimate = raw.get("token_estimate", 0)
            if not isinstance(token_estimate, int) or isinstance(token_estimate, bool):
                raise InputError(
                    "BAD_TOKEN_ESTIMATE", f"elements[{i}] token_estimate must be an integer"
                )
            elements.append(
                ContextElement(
                    element_id=str(raw["element_id"]),
                    role=role,
                    source_kind=kind,
                    label=str(raw["label"]),
                    content_ref=str(raw["content_ref"]),
                    token_estimate=token_estimate,
                    tags=tags,
                    reviewed=bool(raw.get("reviewed", False)),
                )
            )
        except InputError as exc:
            _issue(issues, exc.code, exc.message)

    if issues:
        raise ManifestError(issues)
    try:
        return ContextPackage(
            package_id=str(doc["package_id"]),
            pipeline_id=str(doc["pipeline_id"]),
            stage=stage,
            elements=tuple(elements),
        )
    except InputError as exc:
        raise ManifestError([ParseIssue(exc.code, exc.message)]) from None


def element_to_dict(el: ContextElement) -> dict[str, Any]:
    return {
        "content_ref": el.content_ref,
        "element_id": el.element_id,
        "label": el.label,
        "reviewed": el.reviewed,
        "role": el.role.value,
        "source_kind": el.source_kind.value,
        "tags": sorted(t.value for t in el.tags),
        "token_estimate": el.token_estimate,
    }


def package_to_dict(pkg: ContextPackage) -> dict[str, Any]:
    return {
        "elements": [element_to_dict(el) for el in pkg.elements],
        "package_id": pkg.package_id,
        "pipeline_id": pkg.pipeline_id,
        "stage": pkg.stage.value,
    }


def serialize_manifest(pkg: ContextPackage) -> str:
    return json.dumps(package_to_dict(pkg), indent=2, sort_keys=True) + "\n"
