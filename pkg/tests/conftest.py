"""Shared fixtures: deterministic clocks, manifest and dataset builders."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

import pytest

from ctxpipe.common import Stage
from ctxpipe.engine import (
    FindingCategory,
    Scale,
    Severity,
    ToolDescriptor,
    ToolType,
)
from ctxpipe.workspace import Workspace


def fixed_clock():
    """Monotonic fake timestamps so trails and state files are reproducible."""
    counter = {"n": 0}

    def clock() -> str:
        counter["n"] += 1
        return f"2026-01-02T03:04:{counter['n']:02d}.000000Z"

    return clock


@pytest.fixture
def clock():
    return fixed_clock()


@pytest.fixture
def ws(tmp_path: Path, clock) -> Workspace:
    return Workspace.init(tmp_path / "space", clock=clock)


def make_element(
    element_id: str = "E1",
    role: str = "authority",
    source_kind: str = "file",
    label: str = "primary source",
    content_ref: str = "refs/source.md",
    token_estimate: int = 100,
    tags: Optional[list[str]] = None,
    reviewed: bool = True,
) -> dict[str, Any]:
    el: dict[str, Any] = {
        "element_id": element_id,
        "role": role,
        "source_kind": source_kind,
        "label": label,
        "content_ref": content_ref,
        "token_estimate": token_estimate,
        "reviewed": reviewed,
    }
    if tags is not None:
        el["tags"] = tags
    return el


def make_manifest(
    package_id: str = "PKG-1",
    pipeline_id: str = "P-DEMO-API",
    stage: str = "reviewer",
    elements: Optional[list[dict[str, Any]]] = None,
) -> str:
    if elements is None:
        elements = [make_element()]
    return json.dumps(
        {
            "package_id": package_id,
            "pipeline_id": pipeline_id,
            "stage": stage,
            "elements": elements,
        }
    )


def stage_packages(pipeline_id: str) -> dict[Stage, str]:
    """One well-formed manifest per stage, design-authority tagged where rules need it."""
    authority = make_element(
        "E1", "authority", "file", "design document", "refs/design.md", 900,
        tags=["design_authority"],
    )
    plain = make_element("E1", "authority", "file", "source corpus", "refs/corpus.md", 1200)
    rubric = make_element("E2", "rubric", "file", "quality bar", "refs/rubric.md", 200)
    return {
        Stage.REVIEWER: make_manifest("PKG-R", pipeline_id, "reviewer", [plain, rubric]),
        Stage.DESIGN: make_manifest("PKG-D", pipeline_id, "design", [plain, rubric]),
        Stage.BUILDER: make_manifest("PKG-B", pipeline_id, "builder", [authority, rubric]),
        Stage.AUDITOR: make_manifest("PKG-A", pipeline_id, "auditor", [authority, rubric]),
    }


CLAUDE = ToolDescriptor("Claude", ToolType.GENERALIST_LLM, "project files")
CHATGPT = ToolDescriptor("ChatGPT", ToolType.GENERALIST_LLM, "uploaded documents")


def drive_to_design_complete(ws: Workspace, pipeline_id: str = "P-REPORT-PAPER"):
    """Create a sprint pipeline and complete reviewer + design on main."""
    ws.create_pipeline(*pipeline_id.split("-")[1:], Scale.SPRINT)
    for manifest in stage_packages(pipeline_id).values():
        ws.attach_package(pipeline_id, manifest)
    for stage, pkg_id, artifact in (
        (Stage.REVIEWER, "PKG-R", "artifacts/requirements.md"),
        (Stage.DESIGN, "PKG-D", "artifacts/design.md"),
    ):
        pkg = ws.load_package(pipeline_id, pkg_id)
        _, out = ws.mutate(
            pipeline_id, lambda p: p.begin_stage(stage, CLAUDE, pkg)
        )
        rid = out.record.record_id
        ws.mutate(pipeline_id, lambda p: p.complete_stage(rid, artifact))
    return pipeline_id


def run_report_scenario(ws: Workspace) -> str:
    """The full report-pipeline walkthrough: build, audit, iterate, close."""
    pid = drive_to_design_complete(ws)

    def begin(stage: Stage, pkg_id: str, tool: ToolDescriptor) -> str:
        pkg = ws.load_package(pid, pkg_id)
        _, out = ws.mutate(pid, lambda p: p.begin_stage(stage, tool, pkg))
        return out.record.record_id

    def complete(record_id: str, artifact: str) -> None:
        ws.mutate(pid, lambda p: p.complete_stage(record_id, artifact))

    complete(begin(Stage.BUILDER, "PKG-B", CLAUDE), "artifacts/report-draft.md")
    complete(begin(Stage.AUDITOR, "PKG-A", CHATGPT), "artifacts/audit-1.md")

    def find(severity: Severity, category: FindingCategory, text: str) -> str:
        _, out = ws.mutate(
            pid, lambda p: p.record_finding("main", severity, category, text)
        )
        return out.record.record_id

    builder_redo = find(
        Severity.CRITICAL, FindingCategory.EXECUTION_ERROR,
        "figure three cites the wrong table",
    )
    find(Severity.CRITICAL, FindingCategory.EXECUTION_ERROR, "appendix totals do not sum")
    find(Severity.CRITICAL, FindingCategory.EXECUTION_ERROR, "broken cross-reference")
    design_redo = find(
        Severity.MAJOR, FindingCategory.STRUCTURAL, "results precede methods"
    )
    complete(design_redo, "artifacts/design-v2.md")
    complete(builder_redo, "artifacts/report-final.md")
    ws.mutate(pid, lambda p: p.close())
    return pid


def make_dataset_record(
    number: int,
    tool: str = "Claude",
    outcome: str = "Success with no iteration",
    chain: bool = False,
    authority: Optional[str] = "file",
    tokens: Optional[int] = None,
    stages: Optional[list[str]] = None,
    iterations: Optional[int] = None,
    pipeline_id: str = "P-STUDY-CORPUS",
    date: str = "2025-03-01",
) -> dict[str, Any]:
    package: list[dict[str, Any]] = []
    if authority == "file":
        package.append(
            {
                "priority": 1,
                "role": "authority",
                "type": "file",
                "file_name": "notes.md",
                "description": "primary source",
            }
        )
    elif authority == "verbal":
        package.append(
            {
                "priority": 1,
                "role": "authority",
                "type": "verbal",
                "file_name": None,
                "description": "spoken intent",
            }
        )
    package.append(
        {
            "priority": 4,
            "role": "rubric",
            "type": "file",
            "file_name": "rubric.md",
            "description": "quality bar",
        }
    )
    rec: dict[str, Any] = {
        "number": number,
        "date_range": {"start": date, "end": date},
        "title": f"interaction {number}",
        "pipeline_id": pipeline_id,
        "tools": [tool],
        "stages": stages or ["builder"],
        "context_package": package,
        "asked": "produce the deliverable",
        "produced": "the deliverable",
        "outcome": outcome,
        "evidence": ["transcript line", "artifact diff"],
        "patterns": None,
    }
    if chain:
        rec["chain"] = True
    if tokens is not None:
        rec["total_tokens"] = tokens
    if iterations is not None:
        rec["iterations"] = iterations
    return rec


def table4_dataset() -> str:
    """Synthetic corpus matching the published per-tool outcome counts."""
    records: list[dict[str, Any]] = []
    n = 0

    def add(count: int, tool: str, outcome: str, chain_count: int = 0) -> None:
        nonlocal n
        for i in range(count):
            n += 1
            records.append(
                make_dataset_record(n, tool=tool, outcome=outcome, chain=i < chain_count)
            )

    add(59, "Claude", "Success with no iteration")
    add(35, "Claude", "Success with iteration", chain_count=7)
    add(5, "Claude", "Partial")
    add(3, "Claude", "Failed")
    add(51, "ChatGPT", "Success with no iteration")
    add(38, "ChatGPT", "Success with iteration")
    add(6, "ChatGPT", "Partial")
    add(3, "ChatGPT", "Failed")
    return json.dumps(records)


def table5_dataset() -> str:
    """Synthetic corpus with 84 of 94 file-based-authority records first-pass."""
    records: list[dict[str, Any]] = []
    n = 0

    def add(count: int, outcome: str, authority: Optional[str]) -> None:
        nonlocal n
        for _ in range(count):
            n += 1
            records.append(
                make_dataset_record(n, outcome=outcome, authority=authority)
            )

    add(84, "Success with no iteration", "file")
    add(10, "Success with iteration", "file")
    add(9, "Success with no iteration", "verbal")
    add(5, "Failed", "verbal")
    add(2, "Success with no iteration", None)
    add(5, "Partial", None)
    return json.dumps(records)
