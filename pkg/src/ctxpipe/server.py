"""HTTP service exposing the workspace.

One process serves one workspace. Mutations go through the same
``Workspace.mutate`` path as the CLI, so both front ends produce
identical trails and state files. Set CTXPIPE_TOKEN to require
``Authorization: Bearer <token>`` on every /api route except /api/v1/health.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Optional

from fastapi import APIRouter, Body, Depends, FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import __version__, estimators, reports
from .builtin_types import builtin_types
from .common import Stage, parse_stage
from .dataset import (
    aggregate_quality,
    authority_breakdown,
    serialize_dataset,
    size_breakdown,
    stage_presence,
)
from .engine import (
    ROUTING,
    Pipeline,
    ToolDescriptor,
    parse_category,
    parse_pattern,
    parse_scale,
    parse_severity,
    parse_tool_type,
)
from .errors import (
    BusyError,
    CtxpipeError,
    InputError,
    NotFoundError,
    RuleViolation,
    StateError,
    UndefinedEstimateError,
)
from .packages import (
    classify_size,
    package_to_dict,
    parse_manifest,
    resolve_conflict,
    size_class_for,
    total_tokens,
    validate_package,
)
from .templates import instantiate, parse_template, render_template, validate_template
from .workspace import Workspace

_STATUS_FOR = (
    (InputError, 400),
    (NotFoundError, 404),
    (RuleViolation, 409),
    (UndefinedEstimateError, 422),
    (BusyError, 423),
    (StateError, 409),
)


def _status_code(exc: CtxpipeError) -> int:
    for klass, status in _STATUS_FOR:
        if isinstance(exc, klass):
            return status
    return 500


def error_body(exc: CtxpipeError) -> dict[str, Any]:
    return {
        "error": {
            "code": exc.code,
            "message": exc.message,
            "rule": getattr(exc, "rule", None),
        }
    }


# --- request bodies ----------------------------------------------------------


class ToolBody(BaseModel):
    name: str
    type: str
    mechanism: str = ""


class CreatePipelineBody(BaseModel):
    project: str
    domain: str
    scale: str


class BeginStageBody(BaseModel):
    stage: str
    tool: ToolBody
    package_id: str
    branch: str = "main"


class CompleteStageBody(BaseModel):
    artifact: str
    patterns: list[str] = Field(default_factory=list)


class SkipStageBody(BaseModel):
    stage: str
    reason: str
    branch: str = "main"


class FindingBody(BaseModel):
    severity: str
    category: str
    description: str
    branch: str = "main"


class BranchBody(BaseModel):
    design_record: str
    names: list[str]


class CloseBody(BaseModel):
    confirm: bool = False


class ManifestBody(BaseModel):
    manifest: dict[str, Any]


class ResolveBody(BaseModel):
    manifest: dict[str, Any]
    a: str
    b: str


class ClassifyBody(BaseModel):
    manifest: Optional[dict[str, Any]] = None
    tokens: Optional[int] = None


class TemplateTextBody(BaseModel):
    text: str


class InstantiateBody(BaseModel):
    type: str
    project: str
    domain: str
    overrides: dict[str, str] = Field(default_factory=dict)
    date: Optional[str] = None


class DatasetBody(BaseModel):
    records: list[dict[str, Any]]


# --- response shaping ---------------------------------------------------------


def _warnings(outcome) -> list[dict[str, str]]:
    return [{"code": w.code, "message": w.message} for w in outcome.warnings]


def _record_view(record) -> dict[str, Any]:
    view = record.to_dict()
    view["stage_label"] = record.stage.label
    return view


def _pipeline_summary(pipeline: Pipeline) -> dict[str, Any]:
    return {
        "pipeline_id": pipeline.pipeline_id,
        "project": pipeline.project,
        "domain": pipeline.domain,
        "scale": pipeline.scale.value,
        "status": pipeline.status.value,
        "branches": sorted(pipeline.branches),
        "records": len(pipeline.records),
        "findings": len(pipeline.findings),
    }


def _finding_views(pipeline: Pipeline) -> list[dict[str, Any]]:
    views = []
    for state in pipeline.findings:
        view = state.to_dict()
        view["severity_label"] = state.finding.severity.label
        view["category_label"] = state.finding.category.label
        view["target_stage_label"] = state.target_stage.label
        views.append(view)
    return views


def _package_view(pkg) -> dict[str, Any]:
    findings = validate_package(pkg)
    elements = sorted(pkg.elements, key=lambda e: (e.role.priority, e.element_id))
    return {
        "manifest": package_to_dict(pkg),
        "total_tokens": total_tokens(pkg),
        "size_class": classify_size(pkg).value,
        "elements": [
            {
                "element_id": el.element_id,
                "label": el.label,
                "role": el.role.value,
                "role_label": el.role.label,
                "role_priority": el.role.priority,
                "source_kind": el.source_kind.value,
                "token_estimate": el.token_estimate,
                "reviewed": el.reviewed,
                "tags": sorted(t.value for t in el.tags),
            }
            for el in elements
        ],
        "findings": [
            {"severity": f.severity.value, "code": f.code, "message": f.message}
            for f in findings
        ],
    }


def create_app(
    workspace: Workspace,
    token: Optional[str] = None,
    console_dir: Optional[Path] = None,
) -> FastAPI:
    """Build the application around an opened workspace."""

    if token is None:
        token = os.environ.get("CTXPIPE_TOKEN") or None
    if console_dir is None:
        env_dir = os.environ.get("CTXPIPE_CONSOLE_DIR")
        if env_dir:
            console_dir = Path(env_dir)
        elif Path("frontend/dist").is_dir():
            console_dir = Path("frontend/dist")

    app = FastAPI(title="ctxpipe", version=__version__)

    @app.exception_handler(CtxpipeError)
    async def _domain_error(request: Request, exc: CtxpipeError):
        del request
        return JSONResponse(status_code=_status_code(exc), content=error_body(exc))

    def require_auth(request: Request) -> None:
        if token is None:
            return
        supplied = request.headers.get("authorization", "")
        if supplied != f"Bearer {token}":
            raise _Unauthorized()

    class _Unauthorized(CtxpipeError):
        def __init__(self) -> None:
            super().__init__("UNAUTHORIZED", "missing or invalid bearer token")

    @app.exception_handler(_Unauthorized)
    async def _auth_error(request: Request, exc: _Unauthorized):
        del request
        return JSONResponse(status_code=401, content=error_body(exc))

    open_api = APIRouter(prefix="/api/v1")
    api = APIRouter(prefix="/api/v1", dependencies=[Depends(require_auth)])

    # -- health ---------------------------------------------------------

    @open_api.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok", "version": __version__}

    # -- pipelines --------------------------------------------------------

    @api.get("/pipelines")
    def list_pipelines() -> dict[str, Any]:
        summaries = [
            _pipeline_summary(workspace.load_pipeline(pid))
            for pid in workspace.pipeline_ids()
        ]
        return {"pipelines": summaries}

    @api.post("/pipelines", status_code=201)
    def create_pipeline(body: CreatePipelineBody) -> dict[str, Any]:
        pipeline = workspace.create_pipeline(
            body.project, body.domain, parse_scale(body.scale)
        )
        return _pipeline_summary(pipeline)

    @api.get("/pipelines/{pipeline_id}")
    def get_pipeline(pipeline_id: str) -> dict[str, Any]:
        pipeline = workspace.load_pipeline(pipeline_id)
        view = pipeline.to_dict()
        view["records"] = [_record_view(r) for r in pipeline.records]
        view["findings"] = _finding_views(pipeline)
        return view

    @api.post("/pipelines/{pipeline_id}/stages", status_code=201)
    def begin_stage(pipeline_id: str, body: BeginStageBody) -> dict[str, Any]:
        stage = _stage(body.stage)
        tool = ToolDescriptor(
            name=body.tool.name,
            tool_type=parse_tool_type(body.tool.type),
            context_mechanism=body.tool.mechanism,
        )
        pkg = workspace.load_package(pipeline_id, body.package_id)
        _, outcome = workspace.mutate(
            pipeline_id,
            lambda p: p.begin_stage(stage, tool, pkg, branch_id=body.branch),
        )
        assert outcome.record is not None
        return {"record": _record_view(outcome.record), "warnings": _warnings(outcome)}

    @api.post("/pipelines/{pipeline_id}/stages/{record_id}/complete")
    def complete_stage(
        pipeline_id: str, record_id: str, body: CompleteStageBody
    ) -> dict[str, Any]:
        patterns = [parse_pattern(p) for p in body.patterns]
        _, outcome = workspace.mutate(
            pipeline_id,
            lambda p: p.complete_stage(record_id, body.artifact, patterns=patterns or None),
        )
        assert outcome.record is not None
        return {"record": _record_view(outcome.record), "warnings": _warnings(outcome)}

    @api.post("/pipelines/{pipeline_id}/stages/skip")
    def skip_stage(pipeline_id: str, body: SkipStageBody) -> dict[str, Any]:
        stage = _stage(body.stage)
        _, outcome = workspace.mutate(
            pipeline_id,
            lambda p: p.skip_stage(stage, body.reason, branch_id=body.branch),
        )
        assert outcome.record is not None
        return {"record": _record_view(outcome.record), "warnings": _warnings(outcome)}

    @api.get("/findings/routes")
    def finding_routes() -> dict[str, Any]:
        return {
            "routes": {
                category.value: {
                    "category_label": category.label,
                    "target_stage": stage.value,
                    "target_stage_label": stage.label,
                }
                for category, stage in ROUTING.items()
            }
        }

    @api.post("/pipelines/{pipeline_id}/findings", status_code=201)
    def record_finding(pipeline_id: str, body: FindingBody) -> dict[str, Any]:
        severity = parse_severity(body.severity)
        category = parse_category(body.category)
        _, outcome = workspace.mutate(
            pipeline_id,
            lambda p: p.record_finding(body.branch, severity, category, body.description),
        )
        assert outcome.finding and outcome.route and outcome.record
        routed_payload = outcome.events[-1].payload
        return {
            "finding_id": outcome.finding.finding_id,
            "severity": severity.value,
            "category": category.value,
            "category_label": category.label,
            "target_stage": outcome.route.target_stage.value,
            "target_stage_label": outcome.route.target_stage.label,
            "record_id": outcome.record.record_id,
            "reopened": bool(routed_payload["reopened"]),
        }

    @api.post("/pipelines/{pipeline_id}/branches", status_code=201)
    def create_branches(pipeline_id: str, body: BranchBody) -> dict[str, Any]:
        _, outcome = workspace.mutate(
            pipeline_id, lambda p: p.branch_builders(body.design_record, body.names)
        )
        return {"branches": outcome.branch_ids}

    @api.post("/pipelines/{pipeline_id}/close")
    def close_pipeline(pipeline_id: str, body: CloseBody) -> dict[str, Any]:
        import copy

        pipeline = workspace.load_pipeline(pipeline_id)
        preview = copy.deepcopy(pipeline).close()
        if (
            pipeline.scale.value == "sprint"
            and any(w.code == "NO_AUDITOR" for w in preview.warnings)
            and not body.confirm
        ):
            raise StateError(
                "CONFIRM_REQUIRED",
                "sprint close carries warnings; repeat with confirm=true",
            )
        _, outcome = workspace.mutate(pipeline_id, lambda p: p.close())
        return {
            "pipeline_id": pipeline_id,
            "status": "closed",
            "warnings": _warnings(outcome),
        }

    @api.get("/pipelines/{pipeline_id}/trail")
    def get_trail(pipeline_id: str) -> dict[str, Any]:
        if not workspace.pipeline_exists(pipeline_id):
            raise NotFoundError("UNKNOWN_PIPELINE", f"no pipeline {pipeline_id!r}")
        trail = workspace.trail(pipeline_id)
        result = trail.verify()
        return {
            "pipeline_id": pipeline_id,
            "events": [json.loads(e.to_line()) for e in trail.events()],
            "verify": {"ok": result.ok, "at_seq": result.at_seq, "reason": result.reason},
            "rendered": trail.render(),
        }

    # -- packages ---------------------------------------------------------

    @api.get("/pipelines/{pipeline_id}/packages")
    def list_packages(pipeline_id: str) -> dict[str, Any]:
        pipeline = workspace.load_pipeline(pipeline_id)
        return {"packages": sorted(pipeline.packages)}

    @api.post("/pipelines/{pipeline_id}/packages", status_code=201)
    def attach_package(pipeline_id: str, body: ManifestBody) -> dict[str, Any]:
        pkg, _ = workspace.attach_package(pipeline_id, json.dumps(body.manifest))
        view = _package_view(pkg)
        view["pipeline_id"] = pipeline_id
        return view

    @api.get("/pipelines/{pipeline_id}/packages/{package_id}")
    def get_package(pipeline_id: str, package_id: str) -> dict[str, Any]:
        return _package_view(workspace.load_package(pipeline_id, package_id))

    @api.post("/packages/validate")
    def validate_manifest(body: ManifestBody) -> dict[str, Any]:
        pkg = parse_manifest(json.dumps(body.manifest))
        return _package_view(pkg)

    @api.post("/packages/resolve")
    def resolve_elements(body: ResolveBody) -> dict[str, Any]:
        pkg = parse_manifest(json.dumps(body.manifest))
        by_id = {el.element_id: el for el in pkg.elements}
        try:
            a, b = by_id[body.a], by_id[body.b]
        except KeyError as exc:
            raise NotFoundError(
                "UNKNOWN_ELEMENT", f"no element {exc.args[0]!r} in {pkg.package_id}"
            ) from None
        res = resolve_conflict(a, b)
        return {
            "winner": res.winner,
            "loser": res.loser,
            "outcome": res.outcome.value,
            "rationale": res.rationale,
        }

    @api.post("/packages/classify")
    def classify_manifest(body: ClassifyBody) -> dict[str, Any]:
        if body.tokens is not None:
            return {
                "size_class": size_class_for(body.tokens).value,
                "total_tokens": body.tokens,
            }
        if body.manifest is None:
            raise InputError("BAD_ARGS", "provide manifest or tokens")
        pkg = parse_manifest(json.dumps(body.manifest))
        return {
            "size_class": classify_size(pkg).value,
            "total_tokens": total_tokens(pkg),
        }

    # -- templates ----------------------------------------------------------

    @api.get("/templates")
    def list_templates() -> dict[str, Any]:
        library = builtin_types()
        return {
            "types": [
                {
                    "name": name,
                    "stages": [s.value for s in Stage if s in library[name].templates],
                    "evidence_note": library[name].evidence_note,
                }
                for name in sorted(library)
            ]
        }

    @api.get("/templates/{type_name}")
    def get_type(type_name: str) -> dict[str, Any]:
        library = builtin_types()
        if type_name not in library:
            raise NotFoundError("UNKNOWN_TYPE", f"no pipeline type {type_name!r}")
        ptype = library[type_name]
        return {
            "name": ptype.name,
            "evidence_note": ptype.evidence_note,
            "templates": {
                stage.value: render_template(t) for stage, t in ptype.templates.items()
            },
        }

    @api.post("/templates/validate")
    def validate_template_text(body: TemplateTextBody) -> dict[str, Any]:
        template = parse_template(body.text)
        findings = validate_template(template)
        return {
            "findings": [
                {"severity": f.severity.value, "code": f.code, "message": f.message}
                for f in findings
            ]
        }

    @api.post("/templates/instantiate")
    def instantiate_type(body: InstantiateBody) -> dict[str, Any]:
        stamped = instantiate(
            body.type, body.project, body.domain, body.overrides, today=body.date
        )
        return {
            "templates": {s.value: render_template(t) for s, t in stamped.items()}
        }

    # -- datasets -------------------------------------------------------------

    @api.get("/datasets")
    def list_datasets() -> dict[str, Any]:
        return {"datasets": workspace.dataset_names()}

    @api.post("/datasets/{name}", status_code=201)
    def import_dataset(name: str, body: DatasetBody) -> dict[str, Any]:
        with workspace.workspace_lock():
            count, lints = workspace.import_dataset(name, json.dumps(body.records))
        return {
            "name": name,
            "records": count,
            "lints": [{"code": l.code, "message": l.message} for l in lints],
        }

    @api.get("/datasets/{name}")
    def get_dataset(name: str) -> Any:
        records = workspace.load_dataset(name)
        return JSONResponse(content=json.loads(serialize_dataset(records)))

    @api.get("/datasets/{name}/reports/{kind}")
    def dataset_report(
        name: str,
        kind: str,
        group_by: str = Query("all"),
        format: str = Query("json"),
    ) -> Any:
        records = workspace.load_dataset(name)
        if kind == "quality":
            table = aggregate_quality(records, group_by=group_by)
            rows: Any = [vars(r) for r in table.rows]
            csv_text = reports.quality_csv(table)
        elif kind == "authority":
            breakdown = authority_breakdown(records)
            rows = [
                {
                    "authority": r.authority.value,
                    "total": r.total,
                    "first_pass": r.first_pass,
                    "first_pass_pct": r.first_pass_pct,
                }
                for r in breakdown
            ]
            csv_text = reports.authority_csv(breakdown)
        elif kind == "size":
            sizes = size_breakdown(records)
            rows = [
                {
                    "size": r.size.value,
                    "total": r.total,
                    "avg_iterations": r.avg_iterations,
                    "first_pass_pct": r.first_pass_pct,
                    "avg_is_lower_bound": r.avg_is_lower_bound,
                }
                for r in sizes
            ]
            csv_text = reports.size_csv(sizes)
        elif kind == "stages":
            presence = stage_presence(records)
            rows = {stage.value: presence[stage] for stage in Stage}
            csv_text = reports.stages_csv(presence)
        else:
            raise NotFoundError("UNKNOWN_REPORT", f"no report kind {kind!r}")
        if format == "csv":
            return PlainTextResponse(csv_text, media_type="text/csv")
        return {"kind": kind, "rows": rows}

    # -- estimators ---------------------------------------------------------

    @api.post("/estimators/{name}")
    def run_estimator(name: str, params: dict[str, Any] = Body(...)) -> dict[str, Any]:
        try:
            if name == "lincoln_petersen":
                value = estimators.lincoln_petersen(
                    int(params["n1"]), int(params["n2"]), int(params["m"])
                )
            elif name == "chapman":
                value = estimators.chapman(
                    int(params["n1"]), int(params["n2"]), int(params["m"])
                )
            elif name == "n_version_detection":
                value = estimators.n_version_detection(
                    [float(p) for p in params["p"]]
                )
            elif name == "ib_objective":
                value = estimators.ib_objective(
                    float(params["ixt"]), float(params["ity"]), float(params["beta"])
                )
            elif name == "boehm_cost":
                value = estimators.boehm_cost(
                    float(params["c0"]), int(params["phase"])
                )
            elif name == "wright_cost":
                value = estimators.wright_cost(
                    float(params["c1"]), int(params["n"]), float(params["rate"])
                )
            else:
                raise NotFoundError("UNKNOWN_ESTIMATOR", f"no estimator {name!r}")
        except KeyError as exc:
            raise InputError(
                "MISSING_PARAM", f"estimator {name!r} needs parameter {exc.args[0]!r}"
            ) from None
        except (TypeError, ValueError) as exc:
            raise InputError("BAD_PARAM", str(exc)) from None
        return {"estimator": name, "value": value}

    app.include_router(open_api)
    app.include_router(api)

    if console_dir is not None and console_dir.is_dir():
        app.mount(
            "/console", StaticFiles(directory=console_dir, html=True), name="console"
        )

    return app


def _stage(text: str) -> Stage:
    try:
        return parse_stage(text)
    except ValueError as exc:
        raise InputError("BAD_STAGE", str(exc)) from None
