"""Command-line front door.

Exit codes: 0 success, 1 domain or rule errors, 2 usage errors. Pass
``--format structured`` for machine-readable JSON on stdout; the default
is human-oriented text. The workspace root comes from ``--workspace``,
then the CTXPIPE_WORKSPACE environment variable, then the current
directory. Every subcommand except ``init`` requires an initialized
workspace.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path
from typing import Any, Optional

from . import estimators
from .builtin_types import builtin_types
from .common import Stage, format_half_up, parse_stage
from .dataset import (
    aggregate_quality,
    authority_breakdown,
    size_breakdown,
    stage_presence,
)
from .engine import (
    CrossToolPattern,
    Pipeline,
    ToolDescriptor,
    parse_category,
    parse_pattern,
    parse_scale,
    parse_severity,
    parse_tool_type,
)
from .errors import CtxpipeError, InputError, NotFoundError, StateError
from .packages import (
    classify_size,
    parse_manifest,
    resolve_conflict,
    size_class_for,
    total_tokens,
    validate_package,
)
from . import reports
from .templates import (
    instantiate,
    parse_template,
    render_template,
    validate_template,
)
from .workspace import Workspace, workspace_root_from_env


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CtxpipeError as exc:
        issues = getattr(exc, "issues", None)
        if issues:
            for issue in issues:
                print(f"{exc.code}: {issue.render()}", file=sys.stderr)
        else:
            print(f"{exc.code}: {exc.message}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxpipe",
        description="Context packages, staged pipelines, and their evidence trail.",
    )
    parser.add_argument("--workspace", help="workspace root (default: $CTXPIPE_WORKSPACE or .)")
    parser.add_argument(
        "--format",
        choices=("human", "structured"),
        default="human",
        help="output format",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a workspace skeleton here")
    p.set_defaults(handler=cmd_init)

    pipeline = sub.add_parser("pipeline", help="create, inspect, branch, close")
    psub = pipeline.add_subparsers(dest="subcommand", required=True)

    p = psub.add_parser("create")
    p.add_argument("--project", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--scale", required=True)
    p.set_defaults(handler=cmd_pipeline_create)

    p = psub.add_parser("status")
    p.add_argument("--id", required=True)
    p.set_defaults(handler=cmd_pipeline_status)

    p = psub.add_parser("close")
    p.add_argument("--id", required=True)
    p.add_argument("--yes", action="store_true", help="skip the sprint confirmation")
    p.set_defaults(handler=cmd_pipeline_close)

    p = psub.add_parser("branch")
    p.add_argument("--id", required=True)
    p.add_argument("--design-record", required=True)
    p.add_argument("--name", action="append", required=True)
    p.set_defaults(handler=cmd_pipeline_branch)

    stage = sub.add_parser("stage", help="begin, complete, or skip a stage")
    ssub = stage.add_subparsers(dest="subcommand", required=True)

    p = ssub.add_parser("begin")
    p.add_argument("--id", required=True)
    p.add_argument("--stage", required=True)
    p.add_argument("--branch", default="main")
    p.add_argument("--tool-name", required=True)
    p.add_argument("--tool-type", required=True)
    p.add_argument("--mechanism", default="")
    p.add_argument("--package", required=True, help="attached package id")
    p.set_defaults(handler=cmd_stage_begin)

    p = ssub.add_parser("complete")
    p.add_argument("--id", required=True)
    p.add_argument("--record", required=True)
    p.add_argument("--artifact", required=True)
    p.add_argument("--pattern", action="append", default=[])
    p.set_defaults(handler=cmd_stage_complete)

    p = ssub.add_parser("skip")
    p.add_argument("--id", required=True)
    p.add_argument("--stage", required=True)
    p.add_argument("--branch", default="main")
    p.add_argument("--reason", required=True)
    p.set_defaults(handler=cmd_stage_skip)

    finding = sub.add_parser("finding", help="record an auditor finding")
    fsub = finding.add_subparsers(dest="subcommand", required=True)

    p = fsub.add_parser("record")
    p.add_argument("--id", required=True)
    p.add_argument("--branch", default="main")
    p.add_argument("--severity", required=True)
    p.add_argument("--category", required=True)
    p.add_argument("--description", required=True)
    p.set_defaults(handler=cmd_finding_record)

    package = sub.add_parser("package", help="attach, lint, resolve, classify")
    pkgsub = package.add_subparsers(dest="subcommand", required=True)

    p = pkgsub.add_parser("add")
    p.add_argument("--id", required=True)
    p.add_argument("--manifest", required=True, type=Path)
    p.set_defaults(handler=cmd_package_add)

    p = pkgsub.add_parser("validate")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--id")
    p.add_argument("--package")
    p.set_defaults(handler=cmd_package_validate)

    p = pkgsub.add_parser("resolve")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--id")
    p.add_argument("--package")
    p.add_argument("--a", required=True, help="first element id")
    p.add_argument("--b", required=True, help="second element id")
    p.set_defaults(handler=cmd_package_resolve)

    p = pkgsub.add_parser("classify")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--id")
    p.add_argument("--package")
    p.add_argument("--tokens", type=int)
    p.set_defaults(handler=cmd_package_classify)

    template = sub.add_parser("template", help="export, validate, instantiate")
    tsub = template.add_subparsers(dest="subcommand", required=True)

    p = tsub.add_parser("export")
    p.add_argument("--type", required=True)
    p.add_argument("--stage")
    p.set_defaults(handler=cmd_template_export)

    p = tsub.add_parser("validate")
    p.add_argument("--file", required=True, type=Path)
    p.set_defaults(handler=cmd_template_validate)

    p = tsub.add_parser("instantiate")
    p.add_argument("--type", required=True)
    p.add_argument("--project", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--date", help="override the stamped date")
    p.add_argument("--out", type=Path, help="directory to write stage files into")
    p.set_defaults(handler=cmd_template_instantiate)

    dataset = sub.add_parser("dataset", help="import records, run reports")
    dsub = dataset.add_subparsers(dest="subcommand", required=True)

    p = dsub.add_parser("import")
    p.add_argument("--name", required=True)
    p.add_argument("--file", type=Path)
    p.add_argument("--dir", type=Path)
    p.set_defaults(handler=cmd_dataset_import)

    p = dsub.add_parser("report")
    p.add_argument("--name", required=True)
    p.add_argument(
        "--kind", required=True, choices=("quality", "authority", "size", "stages")
    )
    p.add_argument("--group-by", choices=("all", "tool"), default="all")
    p.add_argument("--out-dir", type=Path, help="also write <kind>.csv and <kind>.png")
    p.set_defaults(handler=cmd_dataset_report)

    estimate = sub.add_parser("estimate", help="run the closed-form estimators")
    esub = estimate.add_subparsers(dest="subcommand", required=True)

    p = esub.add_parser("lp")
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(handler=cmd_estimate_lp)

    p = esub.add_parser("chapman")
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(handler=cmd_estimate_chapman)

    p = esub.add_parser("nversion")
    p.add_argument("--p", action="append", type=float, required=True)
    p.set_defaults(handler=cmd_estimate_nversion)

    p = esub.add_parser("ib")
    p.add_argument("--ixt", type=float, required=True)
    p.add_argument("--ity", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.set_defaults(handler=cmd_estimate_ib)

    p = esub.add_parser("boehm")
    p.add_argument("--c0", type=float, required=True)
    p.add_argument("--phase", type=int, required=True)
    p.set_defaults(handler=cmd_estimate_boehm)

    p = esub.add_parser("wright")
    p.add_argument("--c1", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.set_defaults(handler=cmd_estimate_wright)

    trail = sub.add_parser("trail", help="render or verify the audit trail")
    trsub = trail.add_subparsers(dest="subcommand", required=True)

    p = trsub.add_parser("render")
    p.add_argument("--id", required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(handler=cmd_trail_render)

    p = trsub.add_parser("verify")
    p.add_argument("--id", required=True)
    p.set_defaults(handler=cmd_trail_verify)

    p = sub.add_parser("serve", help="run the local HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.set_defaults(handler=cmd_serve)

    return parser


# --- output helpers --------------------------------------------------------


def emit(args: argparse.Namespace, human: str, structured: dict[str, Any]) -> None:
    if args.format == "structured":
        print(json.dumps(structured, indent=2, sort_keys=True))
    elif human:
        print(human)


def open_workspace(args: argparse.Namespace) -> Workspace:
    return Workspace.open(workspace_root_from_env(args.workspace))


def warnings_block(warnings) -> str:
    return "\n".join(f"warning {w.code}: {w.message}" for w in warnings)


def warnings_json(warnings) -> list[dict[str, str]]:
    return [{"code": w.code, "message": w.message} for w in warnings]


# --- workspace / pipeline commands -----------------------------------------


def cmd_init(args: argparse.Namespace) -> int:
    root = workspace_root_from_env(args.workspace)
    Workspace.init(root)
    emit(args, f"initialized workspace at {root}", {"workspace": str(root)})
    return 0


def cmd_pipeline_create(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    pipeline = ws.create_pipeline(args.project, args.domain, parse_scale(args.scale))
    emit(
        args,
        pipeline.pipeline_id,
        {
            "pipeline_id": pipeline.pipeline_id,
            "scale": pipeline.scale.value,
            "status": pipeline.status.value,
        },
    )
    return 0


def render_status(pipeline: Pipeline) -> str:
    lines = [
        f"pipeline {pipeline.pipeline_id} ({pipeline.scale.value}) - {pipeline.status.value}"
    ]
    for branch in pipeline.branches:
        parent = pipeline.branches[branch]
        origin = f" (from {parent})" if parent else ""
        lines.append(f"branch {branch}{origin}:")
        records = [r for r in pipeline.records if r.branch_id == branch]
        if not records:
            lines.append("  no stage records")
        for r in records:
            extra = ""
            if r.output_artifact:
                extra = f"  artifact={r.output_artifact}"
            elif r.waiver_reason:
                extra = f"  waiver={r.waiver_reason}"
            tool = r.tool.name if r.tool else "-"
            lines.append(
                f"  {r.stage.value:<9} {r.record_id:<24} {r.status.value:<9} tool={tool}{extra}"
            )
    if pipeline.findings:
        lines.append("findings:")
        for f in pipeline.findings:
            lines.append(
                f"  {f.finding.finding_id} {f.finding.severity.value} "
                f"{f.finding.category.value} -> {f.target_stage.value} "
                f"(record {f.record_id}): {f.finding.description}"
            )
    if pipeline.packages:
        lines.append("packages: " + ", ".join(sorted(pipeline.packages)))
    if pipeline.close_warnings:
        for w in pipeline.close_warnings:
            lines.append(f"close warning {w['code']}: {w['message']}")
    return "\n".join(lines)


def cmd_pipeline_status(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    pipeline = ws.load_pipeline(args.id)
    emit(args, render_status(pipeline), pipeline.to_dict())
    return 0


def cmd_pipeline_close(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    pipeline = ws.load_pipeline(args.id)
    preview = copy.deepcopy(pipeline).close()
    needs_confirmation = (
        pipeline.scale.value == "sprint"
        and any(w.code == "NO_AUDITOR" for w in preview.warnings)
        and not args.yes
    )
    if needs_confirmation:
        print(f"sprint pipeline {args.id} would close with warnings:")
        for w in preview.warnings:
            print(f"  {w.code}: {w.message}")
        try:
            answer = input("close anyway? [y/N] ")
        except EOFError:
            answer = ""
        if answer.strip().lower() not in ("y", "yes"):
            raise StateError("CLOSE_ABORTED", "operator declined to close")
    _, outcome = ws.mutate(args.id, lambda p: p.close())
    human = warnings_block(outcome.warnings)
    closed_line = f"closed {args.id}"
    emit(
        args,
        f"{human}\n{closed_line}" if human else closed_line,
        {
            "pipeline_id": args.id,
            "status": "closed",
            "warnings": warnings_json(outcome.warnings),
        },
    )
    return 0


def cmd_pipeline_branch(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    _, outcome = ws.mutate(
        args.id, lambda p: p.branch_builders(args.design_record, args.name)
    )
    emit(
        args,
        "created branches: " + ", ".join(outcome.branch_ids),
        {"pipeline_id": args.id, "branches": outcome.branch_ids},
    )
    return 0


# --- stage / finding commands ---------------------------------------------


def cmd_stage_begin(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    stage = _parse_stage(args.stage)
    tool = ToolDescriptor(
        name=args.tool_name,
        tool_type=parse_tool_type(args.tool_type),
        context_mechanism=args.mechanism,
    )
    pkg = ws.load_package(args.id, args.package)
    _, outcome = ws.mutate(
        args.id, lambda p: p.begin_stage(stage, tool, pkg, branch_id=args.branch)
    )
    record = outcome.record
    assert record is not None
    human = f"began {record.record_id} ({stage.value} on {args.branch})"
    block = warnings_block(outcome.warnings)
    emit(
        args,
        f"{block}\n{human}" if block else human,
        {
            "record_id": record.record_id,
            "stage": stage.value,
            "branch_id": args.branch,
            "status": record.status.value,
            "warnings": warnings_json(outcome.warnings),
        },
    )
    return 0


def cmd_stage_complete(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    patterns = [parse_pattern(p) for p in args.pattern]
    _, outcome = ws.mutate(
        args.id,
        lambda p: p.complete_stage(args.record, args.artifact, patterns=patterns or None),
    )
    record = outcome.record
    assert record is not None
    emit(
        args,
        f"completed {record.record_id} (artifact={record.output_artifact})",
        {
            "record_id": record.record_id,
            "status": record.status.value,
            "output_artifact": record.output_artifact,
            "patterns": [p.value for p in record.patterns],
        },
    )
    return 0


def cmd_stage_skip(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    stage = _parse_stage(args.stage)
    _, outcome = ws.mutate(
        args.id, lambda p: p.skip_stage(stage, args.reason, branch_id=args.branch)
    )
    record = outcome.record
    assert record is not None
    block = warnings_block(outcome.warnings)
    human = f"waived {record.record_id} ({stage.value} on {args.branch})"
    emit(
        args,
        f"{block}\n{human}" if block else human,
        {
            "record_id": record.record_id,
            "status": record.status.value,
            "warnings": warnings_json(outcome.warnings),
        },
    )
    return 0


def cmd_finding_record(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    severity = parse_severity(args.severity)
    category = parse_category(args.category)
    _, outcome = ws.mutate(
        args.id,
        lambda p: p.record_finding(args.branch, severity, category, args.description),
    )
    finding = outcome.finding
    route = outcome.route
    record = outcome.record
    assert finding and route and record
    emit(
        args,
        f"{finding.finding_id} routed to {route.target_stage.value} (record {record.record_id})",
        {
            "finding_id": finding.finding_id,
            "severity": severity.value,
            "category": category.value,
            "target_stage": route.target_stage.value,
            "record_id": record.record_id,
        },
    )
    return 0


# --- package commands ---------------------------------------------------


def _load_cli_package(args: argparse.Namespace, ws: Workspace):
    if args.manifest is not None:
        return parse_manifest(args.manifest.read_text(encoding="utf-8"))
    if args.id and args.package:
        return ws.load_package(args.id, args.package)
    raise InputError(
        "BAD_ARGS", "provide --manifest FILE, or --id PIPELINE with --package ID"
    )


def cmd_package_add(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    pkg, _ = ws.attach_package(args.id, args.manifest.read_text(encoding="utf-8"))
    findings = validate_package(pkg)
    lines = [f"attached {pkg.package_id} to {args.id}"]
    lines.extend(f"{f.severity.value} {f.code}: {f.message}" for f in findings)
    emit(
        args,
        "\n".join(lines),
        {
            "package_id": pkg.package_id,
            "pipeline_id": args.id,
            "findings": [
                {"severity": f.severity.value, "code": f.code, "message": f.message}
                for f in findings
            ],
        },
    )
    return 0


def cmd_package_validate(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    pkg = _load_cli_package(args, ws)
    findings = validate_package(pkg)
    human = (
        "\n".join(f"{f.severity.value} {f.code}: {f.message}" for f in findings)
        or "no findings"
    )
    emit(
        args,
        human,
        {
            "package_id": pkg.package_id,
            "findings": [
                {"severity": f.severity.value, "code": f.code, "message": f.message}
                for f in findings
            ],
        },
    )
    return 0


def cmd_package_resolve(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    pkg = _load_cli_package(args, ws)
    by_id = {el.element_id: el for el in pkg.elements}
    try:
        a, b = by_id[args.a], by_id[args.b]
    except KeyError as exc:
        raise NotFoundError(
            "UNKNOWN_ELEMENT", f"no element {exc.args[0]!r} in {pkg.package_id}"
        ) from None
    res = resolve_conflict(a, b)
    if res.winner:
        human = f"winner: {res.winner} ({res.rationale})"
    else:
        human = f"operator decision required ({res.rationale})"
    emit(
        args,
        human,
        {
            "winner": res.winner,
            "loser": res.loser,
            "outcome": res.outcome.value,
            "rationale": res.rationale,
        },
    )
    return 0


def cmd_package_classify(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    if args.tokens is not None:
        size = size_class_for(args.tokens)
        total = args.tokens
        package_id = None
    else:
        pkg = _load_cli_package(args, ws)
        size = classify_size(pkg)
        total = total_tokens(pkg)
        package_id = pkg.package_id
    emit(
        args,
        f"{size.value} ({total} tokens)",
        {"size_class": size.value, "total_tokens": total, "package_id": package_id},
    )
    return 0


# --- template commands ------------------------------------------------------


def cmd_template_export(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    library = builtin_types()
    if args.type not in library:
        raise NotFoundError(
            "UNKNOWN_TYPE",
            f"no pipeline type {args.type!r} (known: {', '.join(sorted(library))})",
        )
    templates = dict(library[args.type].templates)
    if args.stage:
        stage = _parse_stage(args.stage)
        if stage not in templates:
            raise NotFoundError(
                "UNKNOWN_STAGE", f"type {args.type!r} has no {stage.value} template"
            )
        templates = {stage: templates[stage]}
    written = ws.export_templates(args.type, templates)
    emit(
        args,
        "\n".join(str(p) for p in written),
        {"type": args.type, "files": [str(p) for p in written]},
    )
    return 0


def cmd_template_validate(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    del ws
    template = parse_template(args.file.read_text(encoding="utf-8"))
    findings = validate_template(template)
    human = (
        "\n".join(f"{f.severity.value} {f.code}: {f.message}" for f in findings)
        or "no findings"
    )
    emit(
        args,
        human,
        {
            "findings": [
                {"severity": f.severity.value, "code": f.code, "message": f.message}
                for f in findings
            ]
        },
    )
    return 0


def cmd_template_instantiate(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    overrides: dict[str, str] = {}
    for pair in args.set:
        if "=" not in pair:
            raise InputError("BAD_OVERRIDE", f"--set needs KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value
    stamped = instantiate(
        args.type, args.project, args.domain, overrides, today=args.date
    )
    rendered = {stage.value: render_template(t) for stage, t in stamped.items()}
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        written = []
        for stage_name, text in sorted(rendered.items()):
            path = args.out / f"{stage_name}.md"
            path.write_text(text, encoding="utf-8")
            written.append(str(path))
        emit(args, "\n".join(written), {"files": written})
    else:
        human = "\n".join(rendered[s.value] for s in Stage if s.value in rendered)
        emit(args, human, {"templates": rendered})
    del ws
    return 0


# --- dataset commands -------------------------------------------------------


def cmd_dataset_import(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    if (args.file is None) == (args.dir is None):
        raise InputError("BAD_ARGS", "provide exactly one of --file or --dir")
    if args.file is not None:
        text = args.file.read_text(encoding="utf-8")
    else:
        parts = []
        for path in sorted(args.dir.glob("*.json")):
            doc = json.loads(path.read_text(encoding="utf-8"))
            parts.extend(doc if isinstance(doc, list) else [doc])
        text = json.dumps(parts)
    with ws.workspace_lock():
        count, lints = ws.import_dataset(args.name, text)
    lines = [f"imported {count} records into dataset {args.name!r}"]
    lines.extend(f"warning {lint.code}: {lint.message}" for lint in lints)
    emit(
        args,
        "\n".join(lines),
        {
            "name": args.name,
            "records": count,
            "lints": [{"code": l.code, "message": l.message} for l in lints],
        },
    )
    return 0


def cmd_dataset_report(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    records = ws.load_dataset(args.name)
    if args.kind == "quality":
        table = aggregate_quality(records, group_by=args.group_by)
        human = reports.text_table(reports.QUALITY_HEADERS, reports.quality_rows(table))
        csv_text = reports.quality_csv(table)
        figure = lambda path: reports.quality_figure(table, path)
        structured: dict[str, Any] = {
            "kind": "quality",
            "rows": [vars(r) for r in table.rows],
        }
    elif args.kind == "authority":
        rows = authority_breakdown(records)
        human = reports.text_table(reports.AUTHORITY_HEADERS, reports.authority_rows(rows))
        csv_text = reports.authority_csv(rows)
        figure = lambda path: reports.authority_figure(rows, path)
        structured = {
            "kind": "authority",
            "rows": [
                {
                    "authority": r.authority.value,
                    "total": r.total,
                    "first_pass": r.first_pass,
                    "first_pass_pct": r.first_pass_pct,
                }
                for r in rows
            ],
        }
    elif args.kind == "size":
        rows = size_breakdown(records)
        human = reports.text_table(reports.SIZE_HEADERS, reports.size_rows(rows))
        csv_text = reports.size_csv(rows)
        figure = lambda path: reports.size_figure(rows, path)
        structured = {
            "kind": "size",
            "rows": [
                {
                    "size": r.size.value,
                    "total": r.total,
                    "avg_iterations": r.avg_iterations,
                    "first_pass_pct": r.first_pass_pct,
                    "avg_is_lower_bound": r.avg_is_lower_bound,
                }
                for r in rows
            ],
        }
    else:
        presence = stage_presence(records)
        human = reports.text_table(reports.STAGES_HEADERS, reports.stages_rows(presence))
        csv_text = reports.stages_csv(presence)
        figure = lambda path: reports.stages_figure(presence, path)
        structured = {
            "kind": "stages",
            "rows": {stage.value: presence[stage] for stage in Stage},
        }
    if args.out_dir:
        paths = reports.write_report_files(args.kind, csv_text, figure, args.out_dir)
        human += f"\nwrote {paths['csv']}\nwrote {paths['figure']}"
        structured["files"] = {k: str(v) for k, v in paths.items()}
    emit(args, human, structured)
    return 0


# --- estimator commands -----------------------------------------------------


def _emit_value(args: argparse.Namespace, value: float, rendered: str) -> int:
    emit(args, rendered, {"value": value})
    return 0


def cmd_estimate_lp(args: argparse.Namespace) -> int:
    open_workspace(args)
    value = estimators.lincoln_petersen(args.n1, args.n2, args.m)
    return _emit_value(args, value, f"{value:g}")


def cmd_estimate_chapman(args: argparse.Namespace) -> int:
    open_workspace(args)
    value = estimators.chapman(args.n1, args.n2, args.m)
    return _emit_value(args, value, f"{value:g}")


def cmd_estimate_nversion(args: argparse.Namespace) -> int:
    open_workspace(args)
    value = estimators.n_version_detection(args.p)
    return _emit_value(args, value, format_half_up(value, 3))


def cmd_estimate_ib(args: argparse.Namespace) -> int:
    open_workspace(args)
    value = estimators.ib_objective(args.ixt, args.ity, args.beta)
    return _emit_value(args, value, f"{value:g}")


def cmd_estimate_boehm(args: argparse.Namespace) -> int:
    open_workspace(args)
    value = estimators.boehm_cost(args.c0, args.phase)
    return _emit_value(args, value, f"{value:g}")


def cmd_estimate_wright(args: argparse.Namespace) -> int:
    open_workspace(args)
    value = estimators.wright_cost(args.c1, args.n, args.rate)
    return _emit_value(args, value, f"{value:g}")


# --- trail commands -------------------------------------------------------


def cmd_trail_render(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    if not ws.pipeline_exists(args.id):
        raise NotFoundError("UNKNOWN_PIPELINE", f"no pipeline {args.id!r}")
    text = ws.trail(args.id).render()
    if args.out:
        args.out.write_text(text, encoding="utf-8")
        emit(args, f"wrote {args.out}", {"file": str(args.out)})
    else:
        emit(args, text.rstrip("\n"), {"rendered": text})
    return 0


def cmd_trail_verify(args: argparse.Namespace) -> int:
    ws = open_workspace(args)
    if not ws.pipeline_exists(args.id):
        raise NotFoundError("UNKNOWN_PIPELINE", f"no pipeline {args.id!r}")
    result = ws.trail(args.id).verify()
    emit(
        args,
        result.render(),
        {"ok": result.ok, "at_seq": result.at_seq, "reason": result.reason},
    )
    return 0 if result.ok else 1


# --- serve -------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    ws = open_workspace(args)
    with ws.server_lock():
        app = create_app(ws)
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _parse_stage(text: str) -> Stage:
    try:
        return parse_stage(text)
    except ValueError as exc:
        raise InputError("BAD_STAGE", str(exc)) from None


if __name__ == "__main__":
    sys.exit(main())
