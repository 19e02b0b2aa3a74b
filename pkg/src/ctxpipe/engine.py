"""The four-stage pipeline state machine.

Pipelines move through Reviewer, Design, Builder, and Auditor stages under
six discipline rules. The engine is event-sourced: every operation
validates the request against current state, emits event drafts, and folds
them into the state through one reducer. Replaying a pipeline's events
therefore reconstructs its state exactly, and every state mutation
corresponds to exactly one event.

The engine gates and records work; it never executes any stage itself.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from .common import Stage, STAGE_ORDER
from .common import render_pipeline_id as _render_pipeline_id
from .errors import InputError, NotFoundError, RuleViolation, StateError
from .packages import AuthorityTag, ContextPackage, ContextRole

MAIN_BRANCH = "main"

_BRANCH_RE = re.compile(r"^[A-Za-z0-9_-]+$")


class Scale(str, Enum):
    TASK = "task"
    SPRINT = "sprint"

    @property
    def label(self) -> str:
        return self.value.capitalize()


def parse_scale(text: str) -> Scale:
    try:
        return Scale(text.strip().lower())
    except ValueError:
        raise InputError("BAD_SCALE", f"unknown scale: {text!r}") from None


class ToolType(str, Enum):
    GENERALIST_LLM = "generalist_llm"
    SPECIALIZED_AGENT = "specialized_agent"
    CODE_GENERATOR = "code_generator"
    CLASSIFICATION_SYSTEM = "classification_system"

    @property
    def label(self) -> str:
        return _TOOL_TYPE_LABELS[self]


_TOOL_TYPE_LABELS = {
    ToolType.GENERALIST_LLM: "GeneralistLLM",
    ToolType.SPECIALIZED_AGENT: "SpecializedAgent",
    ToolType.CODE_GENERATOR: "CodeGenerator",
    ToolType.CLASSIFICATION_SYSTEM: "ClassificationSystem",
}


def parse_tool_type(text: str) -> ToolType:
    cleaned = text.strip()
    for tt in ToolType:
        if cleaned == tt.value or cleaned == tt.label or cleaned.lower() == tt.value:
            return tt
    raise InputError("BAD_TOOL_TYPE", f"unknown tool type: {text!r}")


@dataclass(frozen=True)
class ToolDescriptor:
    """Identity of the tool assigned to a stage, for Rule 6 separation."""

    name: str
    tool_type: ToolType
    context_mechanism: str = ""

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise InputError("BAD_TOOL_NAME", "tool name must be non-empty")

    @property
    def vendor(self) -> str:
        """First whitespace-separated token, lowercased; heuristic only."""
        return self.name.split()[0].lower()

    def to_dict(self) -> dict[str, Any]:
        return {
            "context_mechanism": self.context_mechanism,
            "name": self.name,
            "tool_type": self.tool_type.value,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ToolDescriptor":
        return cls(
            name=raw["name"],
            tool_type=ToolType(raw["tool_type"]),
            context_mechanism=raw.get("context_mechanism", ""),
        )


class RecordStatus(str, Enum):
    OPEN = "open"
    COMPLETE = "complete"
    WAIVED = "waived"

    @property
    def label(self) -> str:
        return self.value.capitalize()


class PipelineStatus(str, Enum):
    ACTIVE = "active"
    CLOSED = "closed"

    @property
    def label(self) -> str:
        return self.value.capitalize()


class Severity(str, Enum):
    CRITICAL = "critical"
    MAJOR = "major"
    MINOR = "minor"

    @property
    def label(self) -> str:
        return self.value.capitalize()


def parse_severity(text: str) -> Severity:
    try:
        return Severity(text.strip().lower())
    except ValueError:
        raise InputError("BAD_SEVERITY", f"unknown severity: {text!r}") from None


class FindingCategory(str, Enum):
    EXECUTION_ERROR = "execution_error"
    STRUCTURAL = "structural"
    MISSING_CONTEXT = "missing_context"

    @property
    def label(self) -> str:
        return "".join(part.capitalize() for part in self.value.split("_"))


def parse_category(text: str) -> FindingCategory:
    cleaned = text.strip()
    for cat in FindingCategory:
        if cleaned == cat.value or cleaned == cat.label or cleaned.lower() == cat.value:
            return cat
    raise InputError("BAD_CATEGORY", f"unknown finding category: {text!r}")


# Iteration paths: the kind of problem, not its severity, decides where
# rework happens.
ROUTING: dict[FindingCategory, Stage] = {
    FindingCategory.EXECUTION_ERROR: Stage.BUILDER,
    FindingCategory.STRUCTURAL: Stage.DESIGN,
    FindingCategory.MISSING_CONTEXT: Stage.REVIEWER,
}


class CrossToolPattern(str, Enum):
    """Operator-entered classification of multi-tool audit comparisons."""

    TOOL_DISAGREEMENT = "tool_disagreement"
    ONE_TOOL_SILENT = "one_tool_silent"
    BOTH_AGREE = "both_agree"
    PARTIAL_OVERLAP = "partial_overlap"
    TIME_DECAY = "time_decay"

    @property
    def label(self) -> str:
        return "".join(part.capitalize() for part in self.value.split("_"))


def parse_pattern(text: str) -> CrossToolPattern:
    cleaned = text.strip()
    for pat in CrossToolPattern:
        if cleaned == pat.value or cleaned == pat.label or cleaned.lower() == pat.value:
            return pat
    raise InputError("BAD_PATTERN", f"unknown cross-tool pattern: {text!r}")


@dataclass(frozen=True)
class AuditFinding:
    finding_id: str
    severity: Severity
    category: FindingCategory
    description: str

    def __post_init__(self) -> None:
        if not self.finding_id or not self.description.strip():
            raise InputError(
                "BAD_FINDING", "finding_id and description must be non-empty"
            )


@dataclass(frozen=True)
class IterationRoute:
    finding_id: str
    target_stage: Stage


@dataclass(frozen=True)
class EngineWarning:
    code: str
    message: str


# Predicted failure modes when a stage is skipped; the warning text is part
# of the operator contract.
SKIP_WARNINGS: dict[Stage, str] = {
    Stage.REVIEWER: (
        "skipping reviewer predicts generic or misaligned output: "
        "requirements were never grounded in the source material"
    ),
    Stage.DESIGN: (
        "skipping design predicts structurally incoherent output: "
        "the builder has no architecture to follow"
    ),
    Stage.AUDITOR: (
        "skipping auditor predicts accumulated defects: "
        "nothing independent checks the build before delivery"
    ),
}


@dataclass
class StageRecord:
    """One attempt at a stage on one branch.

    Reopened stages get fresh records; prior records are never mutated
    after completion, preserving the full work history.
    """

    record_id: str
    stage: Stage
    branch_id: str
    status: RecordStatus
    tool: Optional[ToolDescriptor] = None
    package_id: Optional[str] = None
    output_artifact: Optional[str] = None
    waiver_reason: Optional[str] = None
    finding_ids: tuple[str, ...] = ()
    patterns: tuple[CrossToolPattern, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "branch_id": self.branch_id,
            "finding_ids": list(self.finding_ids),
            "output_artifact": self.output_artifact,
            "package_id": self.package_id,
            "patterns": [p.value for p in self.patterns],
            "record_id": self.record_id,
            "stage": self.stage.value,
            "status": self.status.value,
            "tool": self.tool.to_dict() if self.tool else None,
            "waiver_reason": self.waiver_reason,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "StageRecord":
        return cls(
            record_id=raw["record_id"],
            stage=Stage(raw["stage"]),
            branch_id=raw["branch_id"],
            status=RecordStatus(raw["status"]),
            tool=ToolDescriptor.from_dict(raw["tool"]) if raw.get("tool") else None,
            package_id=raw.get("package_id"),
            output_artifact=raw.get("output_artifact"),
            waiver_reason=raw.get("waiver_reason"),
            finding_ids=tuple(raw.get("finding_ids", [])),
            patterns=tuple(CrossToolPattern(p) for p in raw.get("patterns", [])),
        )


@dataclass
class FindingState:
    finding: AuditFinding
    branch_id: str
    target_stage: Stage
    record_id: Optional[str]

    def to_dict(self) -> dict[str, Any]:
        return {
            "branch_id": self.branch_id,
            "category": self.finding.category.value,
            "description": self.finding.description,
            "finding_id": self.finding.finding_id,
            "record_id": self.record_id,
            "severity": self.finding.severity.value,
            "target_stage": self.target_stage.value,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "FindingState":
        return cls(
            finding=AuditFinding(
                finding_id=raw["finding_id"],
                severity=Severity(raw["severity"]),
                category=FindingCategory(raw["category"]),
                description=raw["description"],
            ),
            branch_id=raw["branch_id"],
            target_stage=Stage(raw["target_stage"]),
            record_id=raw.get("record_id"),
        )


class EventKind(str, Enum):
    PIPELINE_CREATED = "PipelineCreated"
    PACKAGE_ATTACHED = "PackageAttached"
    STAGE_BEGUN = "StageBegun"
    STAGE_COMPLETED = "StageCompleted"
    STAGE_WAIVED = "StageWaived"
    FINDING_RECORDED = "FindingRecorded"
    ITERATION_ROUTED = "IterationRouted"
    BRANCH_CREATED = "BranchCreated"
    PIPELINE_CLOSED = "PipelineClosed"


@dataclass(frozen=True)
class EventDraft:
    """A state change validated but not yet written to the trail."""

    kind: EventKind
    payload: dict[str, Any]


@dataclass
class OpOutcome:
    """What an engine operation produced: events to log, warnings to show."""

    events: list[EventDraft] = field(default_factory=list)
    warnings: list[EngineWarning] = field(default_factory=list)
    record: Optional[StageRecord] = None
    finding: Optional[AuditFinding] = None
    route: Optional[IterationRoute] = None
    branch_ids: list[str] = field(default_factory=list)


def render_pipeline_id(project: str, domain: str) -> str:
    try:
        return _render_pipeline_id(project, domain)
    except ValueError as exc:
        raise InputError("BAD_SEGMENT", str(exc)) from None


@dataclass
class Pipeline:
    """Event-sourced state of one pipeline."""

    pipeline_id: str
    project: str
    domain: str
    scale: Scale
    status: PipelineStatus = PipelineStatus.ACTIVE
    branches: dict[str, Optional[str]] = field(
        default_factory=lambda: {MAIN_BRANCH: None}
    )
    records: list[StageRecord] = field(default_factory=list)
    findings: list[FindingState] = field(default_factory=list)
    packages: dict[str, dict[str, Any]] = field(default_factory=dict)
    close_warnings: list[dict[str, str]] = field(default_factory=list)

    # -- construction -------------------------------------------------

    @classmethod
    def create(cls, project: str, domain: str, scale: Scale) -> tuple["Pipeline", OpOutcome]:
        pipeline_id = render_pipeline_id(project, domain)
        draft = EventDraft(
            EventKind.PIPELINE_CREATED,
            {
                "domain": domain,
                "pipeline_id": pipeline_id,
                "project": project,
                "scale": scale.value,
            },
        )
        pipeline = cls._blank()
        pipeline._apply(draft)
        return pipeline, OpOutcome(events=[draft])

    @classmethod
    def _blank(cls) -> "Pipeline":
        return cls(pipeline_id="", project="", domain="", scale=Scale.TASK, branches={})

    @classmethod
    def replay(cls, events: list[tuple[str, dict[str, Any]]]) -> "Pipeline":
        """Reconstruct state by folding (kind, payload) pairs from scratch."""
        pipeline = cls._blank()
        for kind, payload in events:
            pipeline._apply(EventDraft(EventKind(kind), payload))
        return pipeline

    # -- lookup helpers ------------------------------------------------

    def _require_active(self) -> None:
        if self.status is not PipelineStatus.ACTIVE:
            raise StateError(
                "PIPELINE_CLOSED", f"pipeline {self.pipeline_id} is closed"
            )

    def _require_branch(self, branch_id: str) -> None:
        if branch_id not in self.branches:
            raise NotFoundError("UNKNOWN_BRANCH", f"no branch {branch_id!r}")

    def records_for(self, branch_id: str, stage: Stage) -> list[StageRecord]:
        return [
            r for r in self.records if r.branch_id == branch_id and r.stage is stage
        ]

    def record_by_id(self, record_id: str) -> StageRecord:
        for r in self.records:
            if r.record_id == record_id:
                return r
        raise NotFoundError("UNKNOWN_RECORD", f"no stage record {record_id!r}")

    def _ancestry(self, branch_id: str) -> list[str]:
        chain = [branch_id]
        cursor: Optional[str] = branch_id
        while cursor is not None:
            cursor = self.branches.get(cursor)
            if cursor is not None:
                chain.append(cursor)
        return chain

    def _stage_records(self, branch_id: str, stage: Stage) -> list[StageRecord]:
        """Records governing ``stage`` as seen from ``branch_id``.

        Reviewer and Design completion is inherited from ancestor branches
        (a branch forks after design); Builder and Auditor are strictly
        per-branch, since every branch must pass its own build and audit.
        """
        if stage in (Stage.BUILDER, Stage.AUDITOR):
            return self.records_for(branch_id, stage)
        for candidate in self._ancestry(branch_id):
            found = self.records_for(candidate, stage)
            if found:
                return found
        return []

    def _stage_resolved(self, branch_id: str, stage: Stage) -> bool:
        """True when the stage needs no further work before later stages run."""
        recs = self._stage_records(branch_id, stage)
        if not recs:
            return False
        latest = recs[-1]
        return latest.status in (RecordStatus.COMPLETE, RecordStatus.WAIVED)

    def _design_waived(self, branch_id: str) -> bool:
        recs = self._stage_records(branch_id, Stage.DESIGN)
        return bool(recs) and recs[-1].status is RecordStatus.WAIVED

    def _open_record(self, branch_id: str, stage: Stage) -> Optional[StageRecord]:
        for r in self.records_for(branch_id, stage):
            if r.status is RecordStatus.OPEN:
                return r
        return None

    def _complete_builder_tools(self, branch_id: str) -> list[ToolDescriptor]:
        return [
            r.tool
            for r in self.records_for(branch_id, Stage.BUILDER)
            if r.status is RecordStatus.COMPLETE and r.tool is not None
        ]

    def _next_record_id(self, branch_id: str, stage: Stage) -> str:
        n = len(self.records_for(branch_id, stage)) + 1
        return f"{branch_id}-{stage.value}-{n}"

    def branch_children(self, branch_id: str) -> list[str]:
        return [b for b, parent in self.branches.items() if parent == branch_id]

    def _requires_build(self, branch_id: str) -> bool:
        """Fork-point branches that only host Reviewer/Design work are exempt."""
        if self.records_for(branch_id, Stage.BUILDER):
            return True
        return not self.branch_children(branch_id)

    # -- operations ----------------------------------------------------

    def attach_package(self, pkg: ContextPackage, manifest: dict[str, Any]) -> OpOutcome:
        self._require_active()
        if pkg.pipeline_id != self.pipeline_id:
            raise InputError(
                "PACKAGE_PIPELINE_MISMATCH",
                f"package {pkg.package_id!r} targets pipeline {pkg.pipeline_id!r}, "
                f"not {self.pipeline_id!r}",
            )
        if pkg.package_id in self.packages:
            raise StateError(
                "DUPLICATE_PACKAGE",
                f"package {pkg.package_id!r} is already attached",
            )
        draft = EventDraft(
            EventKind.PACKAGE_ATTACHED,
            {"manifest": manifest, "package_id": pkg.package_id},
        )
        self._apply(draft)
        return OpOutcome(events=[draft])

    def begin_stage(
        self,
        stage: Stage,
        tool: ToolDescriptor,
        pkg: ContextPackage,
        branch_id: str = MAIN_BRANCH,
    ) -> OpOutcome:
        self._require_active()
        self._require_branch(branch_id)
        if pkg.stage is not stage:
            raise InputError(
                "PACKAGE_STAGE_MISMATCH",
                f"package {pkg.package_id!r} targets stage {pkg.stage.value}, "
                f"not {stage.value}",
            )
        if pkg.pipeline_id != self.pipeline_id:
            raise InputError(
                "PACKAGE_PIPELINE_MISMATCH",
                f"package {pkg.package_id!r} targets pipeline {pkg.pipeline_id!r}, "
                f"not {self.pipeline_id!r}",
            )
        if self._open_record(branch_id, stage):
            raise StateError(
                "STAGE_ALREADY_OPEN",
                f"branch {branch_id!r} already has an open {stage.value} record",
            )

        # Rule 1: each earlier stage must be complete or waived before the
        # next may begin; Builder completion is never satisfied by waiver.
        for earlier in STAGE_ORDER[: stage.index]:
            recs = self._stage_records(branch_id, earlier)
            latest = recs[-1] if recs else None
            if earlier is Stage.BUILDER:
                ok = latest is not None and latest.status is RecordStatus.COMPLETE
            else:
                ok = latest is not None and latest.status in (
                    RecordStatus.COMPLETE,
                    RecordStatus.WAIVED,
                )
            if not ok:
                raise RuleViolation(
                    1,
                    "RULE1_VIOLATION",
                    f"cannot begin {stage.value} on branch {branch_id!r}: "
                    f"{earlier.value} is not complete or waived",
                )

        warnings: list[EngineWarning] = []

        # Rule 2: build and audit work only under a designated design
        # authority; a waived Design downgrades the gate to a warning.
        if stage in (Stage.BUILDER, Stage.AUDITOR):
            has_design_authority = any(
                el.role is ContextRole.AUTHORITY
                and AuthorityTag.DESIGN_AUTHORITY in el.tags
                for el in pkg.elements
            )
            if not has_design_authority:
                if self._design_waived(branch_id):
                    warnings.append(
                        EngineWarning(
                            "NO_DESIGN_AUTHORITY",
                            f"package {pkg.package_id!r} carries no design "
                            "authority element; proceeding only because design "
                            "was waived on this branch",
                        )
                    )
                else:
                    raise RuleViolation(
                        2,
                        "RULE2_VIOLATION",
                        f"cannot begin {stage.value}: package "
                        f"{pkg.package_id!r} has no authority element tagged "
                        "design_authority",
                    )

        # Rule 6: the executor cannot be the auditor. Tool names compare
        # case-insensitively; a shared vendor with distinct names passes
        # with an informational note.
        if stage is Stage.AUDITOR:
            builder_tools = self._complete_builder_tools(branch_id)
            for bt in builder_tools:
                if bt.name.lower() == tool.name.lower():
                    raise RuleViolation(
                        6,
                        "RULE6_VIOLATION",
                        f"auditor tool {tool.name!r} matches the builder tool "
                        f"on branch {branch_id!r}; the executor cannot be the "
                        "auditor",
                    )
            if any(bt.vendor == tool.vendor for bt in builder_tools):
                warnings.append(
                    EngineWarning(
                        "SAME_VENDOR",
                        f"auditor tool {tool.name!r} shares a vendor with the "
                        "builder tool; separation holds but independence is "
                        "weaker",
                    )
                )

        draft = EventDraft(
            EventKind.STAGE_BEGUN,
            {
                "branch_id": branch_id,
                "package_id": pkg.package_id,
                "record_id": self._next_record_id(branch_id, stage),
                "stage": stage.value,
                "tool": tool.to_dict(),
            },
        )
        self._apply(draft)
        return OpOutcome(
            events=[draft],
            warnings=warnings,
            record=self.record_by_id(draft.payload["record_id"]),
        )

    def complete_stage(
        self,
        record_id: str,
        output_artifact: str,
        patterns: Optional[list[CrossToolPattern]] = None,
    ) -> OpOutcome:
        self._require_active()
        record = self.record_by_id(record_id)
        if record.status is not RecordStatus.OPEN:
            raise StateError(
                "NOT_OPEN",
                f"record {record_id!r} is {record.status.value}, not open",
            )
        if not output_artifact.strip():
            raise InputError(
                "MISSING_ARTIFACT", "a completed stage must name its output artifact"
            )
        if patterns and record.stage is not Stage.AUDITOR:
            raise InputError(
                "BAD_PATTERN_TARGET",
                "cross-tool patterns are recorded on auditor records only",
            )
        draft = EventDraft(
            EventKind.STAGE_COMPLETED,
            {
                "output_artifact": output_artifact,
                "patterns": [p.value for p in patterns or []],
                "record_id": record_id,
            },
        )
        self._apply(draft)
        return OpOutcome(events=[draft], record=self.record_by_id(record_id))

    def skip_stage(
        self, stage: Stage, waiver_reason: str, branch_id: str = MAIN_BRANCH
    ) -> OpOutcome:
        self._require_active()
        self._require_branch(branch_id)
        if stage is Stage.BUILDER:
            raise StateError(
                "NOT_SKIPPABLE",
                "the builder stage cannot be waived: a pipeline with no "
                "builder produces nothing",
            )
        if not waiver_reason.strip():
            raise InputError("MISSING_WAIVER_REASON", "a waiver needs a reason")
        if self._open_record(branch_id, stage):
            raise StateError(
                "STAGE_ALREADY_OPEN",
                f"branch {branch_id!r} has an open {stage.value} record; "
                "complete it instead of waiving",
            )
        if self._stage_resolved(branch_id, stage):
            raise StateError(
                "STAGE_ALREADY_RESOLVED",
                f"{stage.value} on branch {branch_id!r} is already complete "
                "or waived",
            )
        warning = EngineWarning("PREDICTED_FAILURE", SKIP_WARNINGS[stage])
        draft = EventDraft(
            EventKind.STAGE_WAIVED,
            {
                "branch_id": branch_id,
                "record_id": self._next_record_id(branch_id, stage),
                "stage": stage.value,
                "waiver_reason": waiver_reason,
                "warning": warning.message,
            },
        )
        self._apply(draft)
        return OpOutcome(
            events=[draft],
            warnings=[warning],
            record=self.record_by_id(draft.payload["record_id"]),
        )

    def record_finding(
        self,
        branch_id: str,
        severity: Severity,
        category: FindingCategory,
        description: str,
    ) -> OpOutcome:
        self._require_active()
        self._require_branch(branch_id)
        auditor_ok = any(
            r.status in (RecordStatus.OPEN, RecordStatus.COMPLETE)
            for r in self.records_for(branch_id, Stage.AUDITOR)
        )
        if not auditor_ok:
            raise StateError(
                "NO_AUDITOR",
                f"branch {branch_id!r} has no open or complete auditor record "
                "to attribute findings to",
            )
        finding_id = f"F-{len(self.findings) + 1}"
        finding = AuditFinding(finding_id, severity, category, description)
        target = ROUTING[category]

        existing = self._open_record(branch_id, target)
        if existing is not None:
            record_id = existing.record_id
            reopened = False
            inherited_tool = None
            inherited_package = None
        else:
            record_id = self._next_record_id(branch_id, target)
            reopened = True
            # Rework inherits the tool and package of the last real attempt
            # at this stage; a previously waived stage starts from nothing.
            prior = [
                r
                for r in self._stage_records(branch_id, target)
                if r.status is not RecordStatus.WAIVED
            ]
            inherited_tool = prior[-1].tool.to_dict() if prior and prior[-1].tool else None
            inherited_package = prior[-1].package_id if prior else None

        recorded = EventDraft(
            EventKind.FINDING_RECORDED,
            {
                "branch_id": branch_id,
                "category": category.value,
                "description": description,
                "finding_id": finding_id,
                "severity": severity.value,
            },
        )
        routed = EventDraft(
            EventKind.ITERATION_ROUTED,
            {
                "branch_id": branch_id,
                "finding_id": finding_id,
                "package_id": inherited_package,
                "record_id": record_id,
                "reopened": reopened,
                "target_stage": target.value,
                "tool": inherited_tool,
            },
        )
        self._apply(recorded)
        self._apply(routed)
        return OpOutcome(
            events=[recorded, routed],
            finding=finding,
            route=IterationRoute(finding_id, target),
            record=self.record_by_id(record_id),
        )

    def branch_builders(
        self, design_record_id: str, branch_names: list[str]
    ) -> OpOutcome:
        self._require_active()
        design = self.record_by_id(design_record_id)
        if design.stage is not Stage.DESIGN:
            raise InputError(
                "NOT_A_DESIGN_RECORD",
                f"record {design_record_id!r} is a {design.stage.value} record",
            )
        if design.status is not RecordStatus.COMPLETE:
            raise StateError(
                "DESIGN_NOT_COMPLETE",
                f"design record {design_record_id!r} is {design.status.value}; "
                "branches fork only from a complete design",
            )
        if not branch_names:
            raise InputError("NO_BRANCHES", "at least one branch name is required")
        seen: set[str] = set()
        for name in branch_names:
            if not _BRANCH_RE.match(name):
                raise InputError(
                    "BAD_BRANCH_NAME",
                    f"branch name {name!r} must match [A-Za-z0-9_-]+",
                )
            if name in seen or name in self.branches:
                raise InputError(
                    "DUPLICATE_BRANCH", f"branch name {name!r} already exists"
                )
            seen.add(name)
        events = []
        for name in branch_names:
            draft = EventDraft(
                EventKind.BRANCH_CREATED,
                {
                    "branch_id": name,
                    "design_record_id": design_record_id,
                    "parent": design.branch_id,
                },
            )
            self._apply(draft)
            events.append(draft)
        return OpOutcome(events=events, branch_ids=list(branch_names))

    def close(self) -> OpOutcome:
        self._require_active()
        warnings: list[EngineWarning] = []
        for branch_id in self.branches:
            if not self._requires_build(branch_id):
                continue
            builders = self.records_for(branch_id, Stage.BUILDER)
            latest = builders[-1] if builders else None
            if latest is None or latest.status is not RecordStatus.COMPLETE:
                state = latest.status.value if latest else "absent"
                raise StateError(
                    "INCOMPLETE_BUILD",
                    f"branch {branch_id!r} builder is {state}; every branch "
                    "must complete its build before close",
                )
            # Rule 6 holds at close as well as at begin.
            builder_names = {t.name.lower() for t in self._complete_builder_tools(branch_id)}
            for rec in self.records_for(branch_id, Stage.AUDITOR):
                if (
                    rec.status is RecordStatus.COMPLETE
                    and rec.tool is not None
                    and rec.tool.name.lower() in builder_names
                ):
                    raise RuleViolation(
                        6,
                        "RULE6_VIOLATION",
                        f"branch {branch_id!r} auditor tool {rec.tool.name!r} "
                        "matches a builder tool",
                    )
            auditors = self.records_for(branch_id, Stage.AUDITOR)
            audited = bool(auditors) and auditors[-1].status in (
                RecordStatus.COMPLETE,
                RecordStatus.WAIVED,
            )
            if not audited:
                warnings.append(
                    EngineWarning(
                        "NO_AUDITOR",
                        f"branch {branch_id!r} closes without an audit; "
                        "defects may pass undetected",
                    )
                )
        draft = EventDraft(
            EventKind.PIPELINE_CLOSED,
            {"warnings": [{"code": w.code, "message": w.message} for w in warnings]},
        )
        self._apply(draft)
        return OpOutcome(events=[draft], warnings=warnings)

    # -- reducer ---------------------------------------------------------

    def _apply(self, draft: EventDraft) -> None:
        payload = draft.payload
        kind = draft.kind
        if kind is EventKind.PIPELINE_CREATED:
            self.pipeline_id = payload["pipeline_id"]
            self.project = payload["project"]
            self.domain = payload["domain"]
            self.scale = Scale(payload["scale"])
            self.status = PipelineStatus.ACTIVE
            self.branches = {MAIN_BRANCH: None}
        elif kind is EventKind.PACKAGE_ATTACHED:
            self.packages[payload["package_id"]] = payload["manifest"]
        elif kind is EventKind.STAGE_BEGUN:
            self.records.append(
                StageRecord(
                    record_id=payload["record_id"],
                    stage=Stage(payload["stage"]),
                    branch_id=payload["branch_id"],
                    status=RecordStatus.OPEN,
                    tool=ToolDescriptor.from_dict(payload["tool"]),
                    package_id=payload["package_id"],
                )
            )
        elif kind is EventKind.STAGE_COMPLETED:
            record = self.record_by_id(payload["record_id"])
            record.status = RecordStatus.COMPLETE
            record.output_artifact = payload["output_artifact"]
            record.patterns = tuple(
                CrossToolPattern(p) for p in payload.get("patterns", [])
            )
        elif kind is EventKind.STAGE_WAIVED:
            self.records.append(
                StageRecord(
                    record_id=payload["record_id"],
                    stage=Stage(payload["stage"]),
                    branch_id=payload["branch_id"],
                    status=RecordStatus.WAIVED,
                    waiver_reason=payload["waiver_reason"],
                )
            )
        elif kind is EventKind.FINDING_RECORDED:
            self.findings.append(
                FindingState(
                    finding=AuditFinding(
                        finding_id=payload["finding_id"],
                        severity=Severity(payload["severity"]),
                        category=FindingCategory(payload["category"]),
                        description=payload["description"],
                    ),
                    branch_id=payload["branch_id"],
                    # Routing is filled by the paired IterationRouted event.
                    target_stage=ROUTING[FindingCategory(payload["category"])],
                    record_id=None,
                )
            )
        elif kind is EventKind.ITERATION_ROUTED:
            state = next(
                f for f in self.findings
                if f.finding.finding_id == payload["finding_id"]
            )
            state.target_stage = Stage(payload["target_stage"])
            state.record_id = payload["record_id"]
            if payload["reopened"]:
                self.records.append(
                    StageRecord(
                        record_id=payload["record_id"],
                        stage=Stage(payload["target_stage"]),
                        branch_id=payload["branch_id"],
                        status=RecordStatus.OPEN,
                        tool=(
                            ToolDescriptor.from_dict(payload["tool"])
                            if payload.get("tool")
                            else None
                        ),
                        package_id=payload.get("package_id"),
                        finding_ids=(payload["finding_id"],),
                    )
                )
            else:
                record = self.record_by_id(payload["record_id"])
                record.finding_ids = record.finding_ids + (payload["finding_id"],)
        elif kind is EventKind.BRANCH_CREATED:
            self.branches[payload["branch_id"]] = payload["parent"]
        elif kind is EventKind.PIPELINE_CLOSED:
            self.status = PipelineStatus.CLOSED
            self.close_warnings = list(payload.get("warnings", []))
        else:  # pragma: no cover - exhaustive over EventKind
            raise StateError("BAD_EVENT", f"unknown event kind {kind!r}")

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "branches": dict(sorted(self.branches.items(), key=lambda kv: kv[0])),
            "close_warnings": self.close_warnings,
            "domain": self.domain,
            "findings": [f.to_dict() for f in self.findings],
            "packages": {k: self.packages[k] for k in sorted(self.packages)},
            "pipeline_id": self.pipeline_id,
            "project": self.project,
            "records": [r.to_dict() for r in self.records],
            "scale": self.scale.value,
            "status": self.status.value,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "Pipeline":
        return cls(
            pipeline_id=raw["pipeline_id"],
            project=raw["project"],
            domain=raw["domain"],
            scale=Scale(raw["scale"]),
            status=PipelineStatus(raw["status"]),
            branches=dict(raw["branches"]),
            records=[StageRecord.from_dict(r) for r in raw["records"]],
            findings=[FindingState.from_dict(f) for f in raw["findings"]],
            packages=dict(raw["packages"]),
            close_warnings=list(raw["close_warnings"]),
        )
