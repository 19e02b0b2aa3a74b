"""Workspace: a directory holding pipelines, templates, and datasets.

Layout under the root:

    ctxpipe.json                      marker with the schema version
    pipelines/<id>/state              canonical pipeline state document
    pipelines/<id>/trail.log          hash-chained event log
    pipelines/<id>/artifacts/         stage outputs, operator-managed
    pipelines/<id>/packages/<pkg>.json  attached package manifests
    templates/<type>/<stage>.md       exported stage templates
    datasets/<name>.json              imported interaction records
    .locks/                           advisory lock files

The trail is the source of truth: pipelines load by replaying it, and every
mutation appends its events before the state document is rewritten, so the
two can never silently diverge. One logical writer per pipeline is enforced
with non-blocking file locks; contention surfaces as a busy error rather
than a blocked or lost write.
"""

from __future__ import annotations

import errno
import fcntl
import json
import os
import re
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterator, Optional

from .common import parse_pipeline_id
from .dataset import InteractionRecord, boundary_lints, parse_dataset, serialize_dataset
from .engine import OpOutcome, Pipeline, Scale
from .errors import BusyError, InputError, NotFoundError, StateError
from .packages import ContextPackage, package_to_dict, parse_manifest, serialize_manifest
from .templates import StageTemplate, render_template
from .trail import Trail

SCHEMA_VERSION = "1"
MARKER_NAME = "ctxpipe.json"

_NAME_RE = re.compile(r"^[A-Za-z0-9_-]+$")


def utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


Clock = Callable[[], str]


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class Workspace:
    """Handle to an initialized workspace directory."""

    def __init__(self, root: Path, clock: Clock = utc_now) -> None:
        self.root = Path(root)
        self.clock = clock

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def init(cls, root: Path, clock: Clock = utc_now) -> "Workspace":
        root = Path(root)
        marker = root / MARKER_NAME
        if marker.exists():
            raise StateError(
                "WORKSPACE_EXISTS", f"{root} already holds a workspace marker"
            )
        root.mkdir(parents=True, exist_ok=True)
        for sub in ("pipelines", "templates", "datasets", ".locks"):
            (root / sub).mkdir(exist_ok=True)
        _atomic_write(
            marker, json.dumps({"schema_version": SCHEMA_VERSION}, sort_keys=True) + "\n"
        )
        return cls(root, clock)

    @classmethod
    def open(cls, root: Path, clock: Clock = utc_now) -> "Workspace":
        root = Path(root)
        marker = root / MARKER_NAME
        if not marker.exists():
            raise StateError(
                "NOT_A_WORKSPACE",
                f"{root} has no {MARKER_NAME} marker; run init first",
            )
        try:
            doc = json.loads(marker.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            raise StateError("BAD_MARKER", f"{marker} is not parseable") from None
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise StateError(
                "BAD_SCHEMA_VERSION",
                f"workspace schema {doc.get('schema_version')!r} is not "
                f"{SCHEMA_VERSION!r}",
            )
        return cls(root, clock)

    # -- locking --------------------------------------------------------

    @contextmanager
    def _flock(self, name: str, busy_message: str) -> Iterator[None]:
        lock_dir = self.root / ".locks"
        lock_dir.mkdir(exist_ok=True)
        fd = os.open(lock_dir / name, os.O_CREAT | os.O_RDWR, 0o644)
        try:
            try:
                fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
            except OSError as exc:
                if exc.errno in (errno.EACCES, errno.EAGAIN):
                    raise BusyError(busy_message) from None
                raise
            yield
        finally:
            try:
                fcntl.flock(fd, fcntl.LOCK_UN)
            finally:
                os.close(fd)

    @contextmanager
    def pipeline_lock(self, pipeline_id: str) -> Iterator[None]:
        with self._flock(
            f"pipeline-{pipeline_id}.lock",
            f"pipeline {pipeline_id} is being mutated by another process",
        ):
            yield

    @contextmanager
    def workspace_lock(self) -> Iterator[None]:
        with self._flock(
            "workspace.lock", "the workspace is being mutated by another process"
        ):
            yield

    def server_lock(self):
        """Held for a server's lifetime; a second instance gets busy."""
        return self._flock(
            "server.lock", "another server instance already holds this workspace"
        )

    # -- pipelines ---------------------------------------------------------

    def _pipeline_dir(self, pipeline_id: str) -> Path:
        return self.root / "pipelines" / pipeline_id

    def trail(self, pipeline_id: str) -> Trail:
        return Trail(self._pipeline_dir(pipeline_id) / "trail.log", pipeline_id)

    def pipeline_ids(self) -> list[str]:
        base = self.root / "pipelines"
        if not base.is_dir():
            return []
        return sorted(
            p.name for p in base.iterdir() if (p / "trail.log").is_file()
        )

    def pipeline_exists(self, pipeline_id: str) -> bool:
        return (self._pipeline_dir(pipeline_id) / "trail.log").is_file()

    def load_pipeline(self, pipeline_id: str) -> Pipeline:
        """Rebuild state by replaying the pipeline's trail."""
        if not self.pipeline_exists(pipeline_id):
            raise NotFoundError(
                "UNKNOWN_PIPELINE", f"no pipeline {pipeline_id!r} in this workspace"
            )
        try:
            events = self.trail(pipeline_id).events()
            return Pipeline.replay([(ev.kind, ev.payload) for ev in events])
        except Exception as exc:
            if isinstance(exc, NotFoundError):
                raise
            raise StateError(
                "BAD_TRAIL",
                f"trail for {pipeline_id} did not replay cleanly ({exc}); "
                "run trail verify",
            ) from exc

    def state_path(self, pipeline_id: str) -> Path:
        return self._pipeline_dir(pipeline_id) / "state"

    def _persist(self, pipeline: Pipeline, outcome: OpOutcome) -> None:
        """Append the outcome's events, then rewrite the state document.

        Event appends are fsynced; a failure there aborts before the state
        file changes, keeping trail and state consistent.
        """
        trail = self.trail(pipeline.pipeline_id)
        for draft in outcome.events:
            trail.append(draft.kind.value, draft.payload, self.clock())
        _atomic_write(
            self.state_path(pipeline.pipeline_id),
            json.dumps(pipeline.to_dict(), indent=2, sort_keys=True) + "\n",
        )

    def create_pipeline(self, project: str, domain: str, scale: Scale) -> Pipeline:
        pipeline, outcome = Pipeline.create(project, domain, scale)
        pid = pipeline.pipeline_id
        with self.pipeline_lock(pid):
            if self.pipeline_exists(pid):
                raise StateError("PIPELINE_EXISTS", f"pipeline {pid} already exists")
            pdir = self._pipeline_dir(pid)
            (pdir / "artifacts").mkdir(parents=True, exist_ok=True)
            (pdir / "packages").mkdir(parents=True, exist_ok=True)
            self._persist(pipeline, outcome)
        return pipeline

    def mutate(
        self, pipeline_id: str, op: Callable[[Pipeline], OpOutcome]
    ) -> tuple[Pipeline, OpOutcome]:
        """Run one engine operation under the pipeline's writer lock."""
        with self.pipeline_lock(pipeline_id):
            pipeline = self.load_pipeline(pipeline_id)
            outcome = op(pipeline)
            self._persist(pipeline, outcome)
        return pipeline, outcome

    # -- packages ---------------------------------------------------------

    def attach_package(
        self, pipeline_id: str, manifest_text: str
    ) -> tuple[ContextPackage, OpOutcome]:
        pkg = parse_manifest(manifest_text)
        manifest = package_to_dict(pkg)
        pipeline, outcome = self.mutate(
            pipeline_id, lambda p: p.attach_package(pkg, manifest)
        )
        pkg_path = (
            self._pipeline_dir(pipeline_id) / "packages" / f"{pkg.package_id}.json"
        )
        pkg_path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(pkg_path, serialize_manifest(pkg))
        return pkg, outcome

    def load_package(self, pipeline_id: str, package_id: str) -> ContextPackage:
        pipeline = self.load_pipeline(pipeline_id)
        manifest = pipeline.packages.get(package_id)
        if manifest is None:
            raise NotFoundError(
                "UNKNOWN_PACKAGE",
                f"no package {package_id!r} attached to {pipeline_id}",
            )
        return parse_manifest(json.dumps(manifest))

    # -- templates ---------------------------------------------------------

    def export_templates(
        self, type_name: str, templates: dict[Any, StageTemplate]
    ) -> list[Path]:
        if not _NAME_RE.match(type_name):
            raise InputError("BAD_NAME", f"type name {type_name!r} is not file-safe")
        out_dir = self.root / "templates" / type_name
        out_dir.mkdir(parents=True, exist_ok=True)
        written: list[Path] = []
        for stage, template in templates.items():
            path = out_dir / f"{stage.value}.md"
            _atomic_write(path, render_template(template))
            written.append(path)
        return sorted(written)

    # -- datasets -----------------------------------------------------------

    def dataset_path(self, name: str) -> Path:
        if not _NAME_RE.match(name):
            raise InputError("BAD_NAME", f"dataset name {name!r} is not file-safe")
        return self.root / "datasets" / f"{name}.json"

    def import_dataset(self, name: str, text: str) -> tuple[int, list]:
        records = parse_dataset(text)
        lints = boundary_lints(records)
        path = self.dataset_path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(path, serialize_dataset(records))
        return len(records), lints

    def load_dataset(self, name: str) -> list[InteractionRecord]:
        path = self.dataset_path(name)
        if not path.is_file():
            raise NotFoundError("UNKNOWN_DATASET", f"no dataset {name!r}")
        return parse_dataset(path.read_text(encoding="utf-8"))

    def dataset_names(self) -> list[str]:
        base = self.root / "datasets"
        if not base.is_dir():
            return []
        return sorted(p.stem for p in base.glob("*.json"))


def workspace_root_from_env(explicit: Optional[str] = None) -> Path:
    """Resolve the workspace root: flag, then CTXPIPE_WORKSPACE, then cwd."""
    if explicit:
        return Path(explicit)
    return Path(os.environ.get("CTXPIPE_WORKSPACE", "."))


def validate_pipeline_id(text: str) -> str:
    try:
        parse_pipeline_id(text)
    except ValueError as exc:
        raise InputError("BAD_PIPELINE_ID", str(exc)) from None
    return text
