"""Shared primitives: stages, pipeline ids, canonical JSON, rounding."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Any, Optional


class Stage(str, Enum):
    """The four pipeline stages, in execution order."""

    REVIEWER = "reviewer"
    DESIGN = "design"
    BUILDER = "builder"
    AUDITOR = "auditor"

    @property
    def label(self) -> str:
        """Human-facing TitleCase name, e.g. ``"Reviewer"``."""
        return self.value.capitalize()

    @property
    def index(self) -> int:
        return STAGE_ORDER.index(self)


STAGE_ORDER: tuple[Stage, ...] = (
    Stage.REVIEWER,
    Stage.DESIGN,
    Stage.BUILDER,
    Stage.AUDITOR,
)


def parse_stage(text: str) -> Stage:
    """Parse a stage name case-insensitively.

    Raises:
        ValueError: if ``text`` names no stage.
    """
    try:
        return Stage(text.strip().lower())
    except ValueError:
        raise ValueError(f"unknown stage: {text!r}") from None


_SEGMENT_RE = re.compile(r"^[A-Z0-9]+$")


def render_pipeline_id(project: str, domain: str) -> str:
    """Form a pipeline id "P-<PROJECT>-<DOMAIN>" from validated segments.

    Raises:
        ValueError: if a segment is empty or not uppercase alphanumeric.
    """
    for name, segment in (("project", project), ("domain", domain)):
        if not _SEGMENT_RE.match(segment):
            raise ValueError(f"{name} segment {segment!r} must match [A-Z0-9]+")
    return f"P-{project}-{domain}"


def parse_pipeline_id(text: str) -> tuple[str, str]:
    """Split a rendered pipeline id back into (project, domain) segments.

    Raises:
        ValueError: if the text is not of the form P-<PROJECT>-<DOMAIN>.
    """
    parts = text.split("-")
    if len(parts) != 3 or parts[0] != "P":
        raise ValueError(f"pipeline id {text!r} must be P-<PROJECT>-<DOMAIN>")
    render_pipeline_id(parts[1], parts[2])
    return parts[1], parts[2]


def canonical_json(value: Any) -> str:
    """Serialize to JSON with sorted keys and no insignificant whitespace.

    Used everywhere a byte-stable encoding matters (digests, state files).
    """
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def round_half_up(value: float, places: int) -> Decimal:
    """Round with ties away from zero, immune to binary representation noise.

    ``round(52.045, 1)`` under banker's rounding can go either way depending
    on the nearest double; re-reading the repr after a 12-place pre-round
    pins the intended decimal value first.
    """
    quantum = Decimal(1).scaleb(-places)
    return Decimal(repr(round(value, 12))).quantize(quantum, rounding=ROUND_HALF_UP)


def format_half_up(value: float, places: int) -> str:
    """Render ``value`` rounded half-up to ``places`` decimals."""
    return str(round_half_up(value, places))


@dataclass(frozen=True)
class ParseIssue:
    """One problem found while parsing or validating operator input."""

    code: str
    message: str
    line: Optional[int] = None

    def render(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{where}{self.code}: {self.message}"
