"""Built-in pipeline types: six domain instantiations of the stage templates.

Each type bundles four stage templates (Reviewer, Design, Builder, Auditor)
whose sections are authored for this library. The texts are data; operators
export them, edit them, and feed them back through the template parser.
"""

from __future__ import annotations

from functools import lru_cache

from .common import Stage
from .packages import ContextRole
from .templates import ContextRow, Dependencies, PipelineType, StageTemplate

# Deliverables every reviewer output contract must enumerate.
REVIEWER_DELIVERABLES = (
    "an executive summary",
    "a document inventory",
    "a requirements map",
    "a constraints list",
    "a gap analysis",
    "a conflict log",
    "recommendations",
)

_REVIEWER_CONTRACT = (
    "A requirements assessment document containing, in order: "
    "an executive summary, a document inventory, a requirements map, "
    "a constraints list, a gap analysis, a conflict log, and recommendations. "
    "Every entry cites the source element it derives from."
)

_TYPE_SPECS: dict[str, dict[str, str]] = {
    "academic-paper": {
        "domain": "academic writing",
        "artifact": "paper manuscript",
        "brief": "project_brief.md",
        "design_doc": "section_architecture.md",
        "exemplar": "published_sample.md",
        "constraint": "submission_rules.md",
        "rubric": "review_rubric.md",
        "builder_tool": "GeneralistLLM",
        "note": (
            "Matured over long-running manuscript work; the template set "
            "stabilized once first-pass acceptance became routine."
        ),
    },
    "dissertation-chapter": {
        "domain": "dissertation writing",
        "artifact": "dissertation chapter",
        "brief": "chapter_brief.md",
        "design_doc": "chapter_outline.md",
        "exemplar": "accepted_chapter.md",
        "constraint": "committee_requirements.md",
        "rubric": "defense_rubric.md",
        "builder_tool": "GeneralistLLM",
        "note": (
            "Grown from multi-chapter work where committee requirements "
            "demanded strict structural consistency across chapters."
        ),
    },
    "government-proposal": {
        "domain": "government proposal development",
        "artifact": "proposal volume",
        "brief": "solicitation_summary.md",
        "design_doc": "volume_architecture.md",
        "exemplar": "winning_volume.md",
        "constraint": "compliance_matrix.md",
        "rubric": "evaluation_criteria.md",
        "builder_tool": "SpecializedAgent",
        "note": (
            "Hard compliance gates make the auditor stage mandatory in "
            "practice; the checklist mirrors evaluator scoring sheets."
        ),
    },
    "code-build": {
        "domain": "software construction",
        "artifact": "code module",
        "brief": "feature_brief.md",
        "design_doc": "module_design.md",
        "exemplar": "reference_module.md",
        "constraint": "style_and_api_rules.md",
        "rubric": "review_checklist.md",
        "builder_tool": "CodeGenerator",
        "note": (
            "Builds lean on a code generator while audits run through a "
            "different tool; test output doubles as audit evidence."
        ),
    },
    "curriculum-design": {
        "domain": "curriculum design",
        "artifact": "curriculum unit",
        "brief": "course_goals.md",
        "design_doc": "unit_blueprint.md",
        "exemplar": "model_unit.md",
        "constraint": "accreditation_limits.md",
        "rubric": "learning_outcomes_rubric.md",
        "builder_tool": "GeneralistLLM",
        "note": (
            "Outcome alignment dominates: the rubric element carries the "
            "assessment mapping the auditor checks against."
        ),
    },
    "visual-identity": {
        "domain": "visual identity design",
        "artifact": "brand identity sheet",
        "brief": "brand_brief.md",
        "design_doc": "identity_system.md",
        "exemplar": "reference_identity.md",
        "constraint": "usage_restrictions.md",
        "rubric": "brand_review_rubric.md",
        "builder_tool": "SpecializedAgent",
        "note": (
            "Visual work iterates fast; explicit constraint files keep "
            "revisions from drifting outside brand boundaries."
        ),
    },
}

_PLACEHOLDER_META = {
    "author": "type library",
    "date": "2026-01-01",
    "version": "1.0",
}


def _meta(spec: dict[str, str], stage: Stage, tool: str) -> dict[str, str]:
    meta = dict(_PLACEHOLDER_META)
    meta["domain"] = spec["domain"]
    meta["pipeline_id"] = "P-EXAMPLE-" + "".join(
        ch for ch in spec["artifact"].upper() if ch.isalnum()
    )[:12]
    meta["stage"] = stage.value
    meta["target_tool"] = tool
    return meta


def _reviewer(spec: dict[str, str]) -> StageTemplate:
    artifact = spec["artifact"]
    return StageTemplate(
        meta=_meta(spec, Stage.REVIEWER, "GeneralistLLM"),
        purpose=(
            f"Ground the upcoming {artifact} in its source material: take "
            "inventory of every document, extract requirements and "
            "constraints, and surface gaps or conflicts before any design "
            "work begins."
        ),
        context_rows=(
            ContextRow(1, ContextRole.AUTHORITY, spec["brief"],
                       f"Scope, goals, and success criteria for the {artifact}"),
            ContextRow(3, ContextRole.CONSTRAINT, spec["constraint"],
                       f"Hard limits the {artifact} must respect"),
            ContextRow(5, ContextRole.METADATA, "source_inventory.md",
                       "Catalog of available source material and its location"),
        ),
        dependencies=Dependencies(
            upstream=None,
            downstream=Stage.DESIGN,
            handoffs=("requirements map and constraints list feed the design stage",),
        ),
        instructions=(
            "Read every element of the context package before writing. Map "
            "each requirement to the source that states it. Log any two "
            "sources that disagree as a conflict with both citations. Do "
            "not propose structure or content; that is design work."
        ),
        output_contract=_REVIEWER_CONTRACT,
        checklist=(
            "every source document appears in the inventory",
            "each requirement cites its source",
            "conflicts are logged with both sides cited",
            "gaps name the missing material, not just its absence",
        ),
    )


def _design(spec: dict[str, str]) -> StageTemplate:
    artifact = spec["artifact"]
    return StageTemplate(
        meta=_meta(spec, Stage.DESIGN, "GeneralistLLM"),
        purpose=(
            f"Turn the reviewed requirements into the governing structure "
            f"for the {artifact}: what parts exist, what each must "
            "accomplish, and how evidence flows between them."
        ),
        context_rows=(
            ContextRow(1, ContextRole.AUTHORITY, "requirements_map.md",
                       "Reviewer-approved requirements the design must satisfy"),
            ContextRow(2, ContextRole.EXEMPLAR, spec["exemplar"],
                       f"A strong prior {artifact} to pattern structure on"),
            ContextRow(3, ContextRole.CONSTRAINT, spec["constraint"],
                       f"Hard limits the {artifact} must respect"),
        ),
        dependencies=Dependencies(
            upstream=Stage.REVIEWER,
            downstream=Stage.BUILDER,
            handoffs=(f"the finished design becomes the build's authority element",),
        ),
        instructions=(
            "Produce one design document that a builder can follow without "
            "further questions. State the purpose of every part, the "
            "evidence or material it consumes, and explicit boundaries "
            "where requirements conflict. Mark the document as the design "
            "authority for downstream stages."
        ),
        output_contract=(
            f"A single design document governing the {artifact}: named "
            "parts in order, per-part intent, material routed to each "
            "part, and the acceptance conditions the auditor will check."
        ),
        checklist=(
            "every requirement from the map is assigned to a part",
            "each part states what it consumes and what it produces",
            "acceptance conditions are testable as written",
        ),
    )


def _builder(spec: dict[str, str]) -> StageTemplate:
    artifact = spec["artifact"]
    return StageTemplate(
        meta=_meta(spec, Stage.BUILDER, spec["builder_tool"]),
        purpose=(
            f"Produce the {artifact} exactly as the design prescribes, "
            "raising deviations back to the operator instead of silently "
            "improvising."
        ),
        context_rows=(
            ContextRow(1, ContextRole.AUTHORITY, spec["design_doc"],
                       f"Governing design for the {artifact}; tagged design_authority"),
            ContextRow(2, ContextRole.EXEMPLAR, spec["exemplar"],
                       "Reference output demonstrating the expected texture"),
            ContextRow(3, ContextRole.CONSTRAINT, spec["constraint"],
                       f"Hard limits the {artifact} must respect"),
            ContextRow(4, ContextRole.RUBRIC, spec["rubric"],
                       f"Quality bar the {artifact} will be audited against"),
        ),
        dependencies=Dependencies(
            upstream=Stage.DESIGN,
            downstream=Stage.AUDITOR,
            handoffs=("the built artifact and build notes go to the auditor",),
        ),
        instructions=(
            "Follow the design document part by part; it outranks every "
            "other element in this package. Where the design is silent, "
            "prefer the exemplar's conventions. Record each decision the "
            "design did not dictate in the build notes."
        ),
        output_contract=(
            f"The complete {artifact} plus build notes listing decisions "
            "taken where the design was silent, one line per decision."
        ),
        checklist=(
            "output follows the design's part order exactly",
            "no constraint from the constraints file is violated",
            "build notes record every undirected decision",
        ),
    )


def _auditor(spec: dict[str, str]) -> StageTemplate:
    artifact = spec["artifact"]
    return StageTemplate(
        meta=_meta(spec, Stage.AUDITOR, "GeneralistLLM"),
        purpose=(
            f"Audit the built {artifact} against the design and rubric "
            "with fresh eyes, classifying each finding so it routes to the "
            "right stage for rework."
        ),
        context_rows=(
            ContextRow(1, ContextRole.AUTHORITY, spec["design_doc"],
                       f"Governing design for the {artifact}; tagged design_authority"),
            ContextRow(4, ContextRole.RUBRIC, spec["rubric"],
                       "Scoring rubric: what counts as pass, rework, or reject"),
            ContextRow(5, ContextRole.METADATA, "build_notes.md",
                       "Builder's notes on decisions the design did not dictate"),
        ),
        dependencies=Dependencies(
            upstream=Stage.BUILDER,
            downstream=None,
            handoffs=("findings route to builder, design, or reviewer by category",),
        ),
        instructions=(
            "You did not build this artifact; judge only what is in front "
            "of you. Check every rubric line and every design acceptance "
            "condition. For each defect, record severity (critical, major, "
            "minor) and category: execution errors route to the builder, "
            "structural problems to design, missing context to the reviewer."
        ),
        output_contract=(
            "An audit report: verdict per rubric line, a findings list "
            "with severity and category per finding, and an overall "
            "accept/rework recommendation."
        ),
        checklist=(
            "every rubric line has an explicit verdict",
            "each finding carries severity and category",
            "the audit tool differs from the build tool",
        ),
    )


@lru_cache(maxsize=1)
def builtin_types() -> dict[str, PipelineType]:
    """The six built-in pipeline types, keyed by name."""
    library: dict[str, PipelineType] = {}
    for name, spec in _TYPE_SPECS.items():
        library[name] = PipelineType(
            name=name,
            templates={
                Stage.REVIEWER: _reviewer(spec),
                Stage.DESIGN: _design(spec),
                Stage.BUILDER: _builder(spec),
                Stage.AUDITOR: _auditor(spec),
            },
            evidence_note=spec["note"],
        )
    return library
