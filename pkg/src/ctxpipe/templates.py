"""Seven-section stage templates: parse, validate, render, instantiate.

A stage template is a text document with exactly seven canonical sections
in fixed order: META, PURPOSE, CONTEXT PACKAGE, DEPENDENCIES, INSTRUCTIONS,
OUTPUT CONTRACT, VALIDATION CHECKLIST. Headers use ``##`` markers and match
case-insensitively; CONTEXT PACKAGE holds a pipe-delimited table of
priority/role/filename/description rows. This module's grammar is the
normative definition of the format.

Section bodies are free text but may not contain lines beginning with
``## `` (those always open a new section).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .common import ParseIssue, Stage, parse_stage
from .errors import InputError, NotFoundError
from .packages import ContextRole, FindingSeverity, parse_role, priority_of

SECTION_ORDER = (
    "META",
    "PURPOSE",
    "CONTEXT PACKAGE",
    "DEPENDENCIES",
    "INSTRUCTIONS",
    "OUTPUT CONTRACT",
    "VALIDATION CHECKLIST",
)

REQUIRED_META_KEYS = (
    "author",
    "date",
    "domain",
    "pipeline_id",
    "stage",
    "target_tool",
    "version",
)

TABLE_HEADER = ("Priority", "Role", "Filename", "Description")


@dataclass(frozen=True)
class ContextRow:
    priority: int
    role: ContextRole
    filename: str
    description: str


@dataclass(frozen=True)
class Dependencies:
    upstream: Optional[Stage]
    downstream: Optional[Stage]
    handoffs: tuple[str, ...] = ()


@dataclass(frozen=True)
class StageTemplate:
    meta: dict[str, str]
    purpose: str
    context_rows: tuple[ContextRow, ...]
    dependencies: Dependencies
    instructions: str
    output_contract: str
    checklist: tuple[str, ...]
    extras: tuple[tuple[str, str], ...] = ()

    @property
    def stage(self) -> Optional[Stage]:
        try:
            return parse_stage(self.meta.get("stage", ""))
        except ValueError:
            return None


@dataclass(frozen=True)
class TemplateFinding:
    severity: FindingSeverity
    code: str
    message: str


@dataclass(frozen=True)
class PipelineType:
    """A named, reusable bundle of stage templates."""

    name: str
    templates: dict[Stage, StageTemplate] = field(default_factory=dict)
    evidence_note: str = ""


class TemplateParseError(InputError):
    """A template document failed to parse; ``issues`` lists every problem."""

    def __init__(self, issues: list[ParseIssue]) -> None:
        summary = "; ".join(issue.render() for issue in issues)
        super().__init__("BAD_TEMPLATE", f"invalid template: {summary}")
        self.issues = issues


# --- parsing -----------------------------------------------------------


def _split_sections(
    text: str, issues: list[ParseIssue]
) -> list[tuple[str, str, int, list[tuple[int, str]]]]:
    """Return (canonical_name, raw_name, header_line, body) per section."""
    sections: list[tuple[str, str, int, list[tuple[int, str]]]] = []
    current: Optional[list[tuple[int, str]]] = None
    for no, line in enumerate(text.splitlines(), start=1):
        if line.startswith("## "):
            raw = line[3:].strip()
            body: list[tuple[int, str]] = []
            sections.append((raw.upper(), raw, no, body))
            current = body
        elif current is None:
            if line.strip():
                issues.append(
                    ParseIssue(
                        "STRAY_TEXT", "text before the first section header", line=no
                    )
                )
        else:
            current.append((no, line))
    return sections


def _body_text(body: list[tuple[int, str]]) -> str:
    lines = [text for _, text in body]
    while lines and not lines[0].strip():
        lines.pop(0)
    while lines and not lines[-1].strip():
        lines.pop()
    return "\n".join(lines)


def _parse_meta(body: list[tuple[int, str]], issues: list[ParseIssue]) -> dict[str, str]:
    meta: dict[str, str] = {}
    for no, line in body:
        if not line.strip():
            continue
        if ":" not in line:
            issues.append(
                ParseIssue("BAD_META_LINE", f"expected 'key: value', got {line!r}", no)
            )
            continue
        key, value = line.split(":", 1)
        meta[key.strip()] = value.strip()
    return meta


def _split_table_row(line: str) -> Optional[list[str]]:
    stripped = line.strip()
    if not (stripped.startswith("|") and stripped.endswith("|")):
        return None
    return [cell.strip() for cell in stripped[1:-1].split("|")]


def _parse_table(
    body: list[tuple[int, str]], issues: list[ParseIssue]
) -> tuple[ContextRow, ...]:
    lines = [(no, line) for no, line in body if line.strip()]
    if not lines:
        return ()
    no, header = lines[0]
    cells = _split_table_row(header)
    if cells is None or [c.lower() for c in cells] != [h.lower() for h in TABLE_HEADER]:
        issues.append(
            ParseIssue(
                "BAD_TABLE_ROW",
                "table must start with header | Priority | Role | Filename | Description |",
                no,
            )
        )
        return ()
    if len(lines) < 2 or not all(
        set(c) <= set("-: ") and c.strip()
        for c in (_split_table_row(lines[1][1]) or [""])
    ):
        issues.append(
            ParseIssue("BAD_TABLE_ROW", "table header must be followed by a separator row",
                       lines[1][0] if len(lines) > 1 else no)
        )
        return ()
    rows: list[ContextRow] = []
    for no, line in lines[2:]:
        cells = _split_table_row(line)
        if cells is None or len(cells) != 4:
            issues.append(
                ParseIssue("BAD_TABLE_ROW", f"expected 4 cells, got {line!r}", no)
            )
            continue
        try:
            priority = int(cells[0])
        except ValueError:
            issues.append(
                ParseIssue("BAD_TABLE_ROW", f"priority {cells[0]!r} is not an integer", no)
            )
            continue
        try:
            role = parse_role(cells[1])
        except InputError:
            issues.append(
                ParseIssue("UNKNOWN_ROLE", f"role {cells[1]!r} is not a context role", no)
            )
            continue
        rows.append(ContextRow(priority, role, cells[2], cells[3]))
    return tuple(rows)


def _parse_dependencies(
    body: list[tuple[int, str]], issues: list[ParseIssue]
) -> Dependencies:
    upstream: Optional[Stage] = None
    downstream: Optional[Stage] = None
    handoffs: list[str] = []
    seen: set[str] = set()
    in_handoffs = False
    for no, line in body:
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("- "):
            if in_handoffs:
                handoffs.append(stripped[2:].strip())
            else:
                issues.append(
                    ParseIssue("BAD_DEPENDENCY", "list item outside handoffs:", no)
                )
            continue
        if ":" not in stripped:
            issues.append(
                ParseIssue("BAD_DEPENDENCY", f"expected 'key: value', got {line!r}", no)
            )
            continue
        key, value = (part.strip() for part in stripped.split(":", 1))
        key = key.lower()
        if key in ("upstream", "downstream"):
            seen.add(key)
            in_handoffs = False
            if value.lower() == "none":
                parsed: Optional[Stage] = None
            else:
                try:
                    parsed = parse_stage(value)
                except ValueError:
                    issues.append(
                        ParseIssue("BAD_DEPENDENCY", f"{key} names no stage: {value!r}", no)
                    )
                    continue
            if key == "upstream":
                upstream = parsed
            else:
                downstream = parsed
        elif key == "handoffs":
            seen.add(key)
            in_handoffs = True
            if value:
                issues.append(
                    ParseIssue(
                        "BAD_DEPENDENCY", "handoffs items belong on '- ' lines", no
                    )
                )
        else:
            issues.append(
                ParseIssue("BAD_DEPENDENCY", f"unknown dependency key {key!r}", no)
            )
    for key in ("upstream", "downstream", "handoffs"):
        if key not in seen:
            issues.append(
                ParseIssue("BAD_DEPENDENCY", f"DEPENDENCIES lacks {key!r} line")
            )
    return Dependencies(upstream, downstream, tuple(handoffs))


def _parse_checklist(
    body: list[tuple[int, str]], issues: list[ParseIssue]
) -> tuple[str, ...]:
    items: list[str] = []
    for no, line in body:
        stripped = line.strip()
        if not stripped:
            continue
        if not stripped.startswith("- "):
            issues.append(
                ParseIssue("BAD_CHECKLIST_ITEM", f"expected '- ' item, got {line!r}", no)
            )
            continue
        item = stripped[2:].strip()
        for box in ("[ ]", "[x]", "[X]"):
            if item.startswith(box):
                item = item[len(box):].strip()
                break
        items.append(item)
    return tuple(items)


def parse_template(text: str) -> StageTemplate:
    """Parse a seven-section template document.

    Raises:
        TemplateParseError: with every problem found, line-numbered where
            the problem is tied to a specific line.
    """
    issues: list[ParseIssue] = []
    sections = _split_sections(text, issues)

    by_name: dict[str, tuple[str, int, list[tuple[int, str]]]] = {}
    extras: list[tuple[str, str]] = []
    for canonical, raw, line_no, body in sections:
        if canonical in SECTION_ORDER:
            if canonical in by_name:
                issues.append(
                    ParseIssue("DUPLICATE_SECTION", f"section {canonical} repeats", line_no)
                )
                continue
            by_name[canonical] = (raw, line_no, body)
        else:
            extras.append((raw, _body_text(body)))

    for name in SECTION_ORDER:
        if name not in by_name:
            issues.append(ParseIssue("MISSING_SECTION", f"section {name} is missing"))

    positions = [by_name[n][1] for n in SECTION_ORDER if n in by_name]
    if positions != sorted(positions):
        issues.append(
            ParseIssue(
                "SECTION_ORDER",
                "sections must appear in the order " + ", ".join(SECTION_ORDER),
            )
        )

    def body_of(name: str) -> list[tuple[int, str]]:
        return by_name[name][2] if name in by_name else []

    meta = _parse_meta(body_of("META"), issues)
    purpose = _body_text(body_of("PURPOSE"))
    rows = _parse_table(body_of("CONTEXT PACKAGE"), issues)
    deps = (
        _parse_dependencies(body_of("DEPENDENCIES"), issues)
        if "DEPENDENCIES" in by_name
        else Dependencies(None, None)
    )
    instructions = _body_text(body_of("INSTRUCTIONS"))
    output_contract = _body_text(body_of("OUTPUT CONTRACT"))
    checklist = _parse_checklist(body_of("VALIDATION CHECKLIST"), issues)

    if issues:
        raise TemplateParseError(issues)
    return StageTemplate(
        meta=meta,
        purpose=purpose,
        context_rows=rows,
        dependencies=deps,
        instructions=instructions,
        output_contract=output_contract,
        checklist=checklist,
        extras=tuple(extras),
    )


# --- validation ---------------------------------------------------------


def validate_template(t: StageTemplate) -> list[TemplateFinding]:
    """Check a parsed template's internal consistency; never raises."""
    findings: list[TemplateFinding] = []
    for key in REQUIRED_META_KEYS:
        if not t.meta.get(key, "").strip():
            findings.append(
                TemplateFinding(
                    FindingSeverity.ERROR,
                    "MISSING_META",
                    f"META lacks required key {key!r}",
                )
            )
    if t.meta.get("stage", "").strip() and t.stage is None:
        findings.append(
            TemplateFinding(
                FindingSeverity.WARNING,
                "BAD_META_STAGE",
                f"META stage {t.meta.get('stage')!r} names no pipeline stage",
            )
        )
    if not t.purpose.strip():
        findings.append(
            TemplateFinding(
                FindingSeverity.ERROR, "EMPTY_PURPOSE", "PURPOSE must not be empty"
            )
        )
    for row in t.context_rows:
        expected = priority_of(row.role)
        if row.priority != expected:
            findings.append(
                TemplateFinding(
                    FindingSeverity.ERROR,
                    "PRIORITY_ROLE_MISMATCH",
                    f"row {row.filename!r}: role {row.role.label} has priority "
                    f"{expected}, not {row.priority}",
                )
            )
    if not t.checklist:
        findings.append(
            TemplateFinding(
                FindingSeverity.WARNING,
                "EMPTY_CHECKLIST",
                "VALIDATION CHECKLIST has no items",
            )
        )
    for name, _ in t.extras:
        findings.append(
            TemplateFinding(
                FindingSeverity.INFO,
                "EXTRA_SECTION",
                f"non-canonical section {name!r} preserved verbatim",
            )
        )
    findings.sort(key=lambda f: (f.severity.rank, f.code))
    return findings


# --- rendering -----------------------------------------------------------


def render_template(t: StageTemplate) -> str:
    """Render the canonical document form; parse(render(t)) == t."""
    parts: list[str] = []
    meta_lines = [f"{key}: {t.meta[key]}" for key in sorted(t.meta)]
    parts.append("## META\n" + "\n".join(meta_lines))
    parts.append("## PURPOSE\n" + t.purpose)
    table = [
        "| Priority | Role | Filename | Description |",
        "| --- | --- | --- | --- |",
    ]
    for row in t.context_rows:
        table.append(
            f"| {row.priority} | {row.role.label} | {row.filename} | {row.description} |"
        )
    parts.append("## CONTEXT PACKAGE\n" + "\n".join(table))
    dep = t.dependencies
    dep_lines = [
        f"upstream: {dep.upstream.value if dep.upstream else 'none'}",
        f"downstream: {dep.downstream.value if dep.downstream else 'none'}",
        "handoffs:",
    ]
    dep_lines.extend(f"- {h}" for h in dep.handoffs)
    parts.append("## DEPENDENCIES\n" + "\n".join(dep_lines))
    parts.append("## INSTRUCTIONS\n" + t.instructions)
    parts.append("## OUTPUT CONTRACT\n" + t.output_contract)
    parts.append(
        "## VALIDATION CHECKLIST\n" + "\n".join(f"- [ ] {item}" for item in t.checklist)
    )
    for name, text in t.extras:
        parts.append(f"## {name}\n{text}")
    return "\n\n".join(parts) + "\n"


# --- instantiation --------------------------------------------------------


def instantiate(
    type_name: str,
    project: str,
    domain: str,
    overrides: Optional[dict[str, str]] = None,
    today: Optional[str] = None,
) -> dict[Stage, StageTemplate]:
    """Stamp a built-in pipeline type into concrete stage templates.

    Fills META pipeline_id, date, and version; ``overrides`` then replace
    META values only.

    Raises:
        NotFoundError: for an unknown type name.
        InputError: for invalid project/domain segments.
    """
    from datetime import date as _date

    from .builtin_types import builtin_types
    from .common import render_pipeline_id

    library = builtin_types()
    if type_name not in library:
        known = ", ".join(sorted(library))
        raise NotFoundError(
            "UNKNOWN_TYPE", f"no pipeline type {type_name!r} (known: {known})"
        )
    try:
        pipeline_id = render_pipeline_id(project, domain)
    except ValueError as exc:
        raise InputError("BAD_SEGMENT", str(exc)) from None
    stamp = today if today is not None else _date.today().isoformat()

    result: dict[Stage, StageTemplate] = {}
    for stage, template in library[type_name].templates.items():
        meta = dict(template.meta)
        meta["pipeline_id"] = pipeline_id
        meta["date"] = stamp
        meta["version"] = "1.0"
        for key, value in (overrides or {}).items():
            meta[key] = value
        result[stage] = StageTemplate(
            meta=meta,
            purpose=template.purpose,
            context_rows=template.context_rows,
            dependencies=template.dependencies,
            instructions=template.instructions,
            output_contract=template.output_contract,
            checklist=template.checklist,
            extras=template.extras,
        )
    return result
