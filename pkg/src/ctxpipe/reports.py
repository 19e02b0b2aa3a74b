"""Report rendering: delimited tables and chart files for the aggregations.

Every report kind produces a CSV document; when given an output directory
it also renders a matching bar-chart figure. Text tables for terminal
display live here too, so the CLI and tests share one formatting path.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .common import Stage
from .dataset import AuthorityRow, QualityTable, SizeRow


def one_decimal(value: float) -> str:
    return f"{value:.1f}"


def whole_percent(value: float) -> str:
    return f"{value:.0f}"


def trimmed(value: float) -> str:
    """62.5 -> "62.5", 36.0 -> "36"."""
    return f"{value:.1f}".rstrip("0").rstrip(".")


def text_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def fmt(row: Sequence[str]) -> str:
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines) + "\n"


def _csv(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(headers)
    writer.writerows(rows)
    return buf.getvalue()


# --- quality -----------------------------------------------------------


def quality_rows(table: QualityTable) -> list[list[str]]:
    rows = []
    for r in table.rows:
        avg = one_decimal(r.avg_iterations)
        if r.avg_is_lower_bound:
            avg = f">={avg}"
        rows.append(
            [
                r.group,
                str(r.total),
                str(r.first_pass),
                str(r.iterated),
                str(r.partial),
                str(r.failed),
                one_decimal(r.first_pass_pct),
                one_decimal(r.final_success_pct),
                avg,
            ]
        )
    return rows


QUALITY_HEADERS = [
    "group",
    "total",
    "first_pass",
    "iterated",
    "partial",
    "failed",
    "first_pass_pct",
    "final_success_pct",
    "avg_iterations",
]


def quality_csv(table: QualityTable) -> str:
    return _csv(QUALITY_HEADERS, quality_rows(table))


def quality_figure(table: QualityTable, path: Path) -> None:
    groups = [r.group for r in table.rows]
    x = range(len(groups))
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.38
    ax.bar(
        [i - width / 2 for i in x],
        [r.first_pass_pct for r in table.rows],
        width,
        label="first pass",
    )
    ax.bar(
        [i + width / 2 for i in x],
        [r.final_success_pct for r in table.rows],
        width,
        label="final success",
    )
    ax.set_xticks(list(x), groups)
    ax.set_ylabel("percent of records")
    ax.set_ylim(0, 100)
    ax.set_title("Quality outcomes")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# --- authority ----------------------------------------------------------


AUTHORITY_HEADERS = ["authority", "total", "first_pass", "first_pass_pct"]


def authority_rows(rows: tuple[AuthorityRow, ...]) -> list[list[str]]:
    return [
        [r.authority.label, str(r.total), str(r.first_pass), whole_percent(r.first_pass_pct)]
        for r in rows
    ]


def authority_csv(rows: tuple[AuthorityRow, ...]) -> str:
    return _csv(AUTHORITY_HEADERS, authority_rows(rows))


def authority_figure(rows: tuple[AuthorityRow, ...], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([r.authority.label for r in rows], [r.first_pass_pct for r in rows])
    ax.set_ylabel("first-pass percent")
    ax.set_ylim(0, 100)
    ax.set_title("First-pass rate by authority type")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# --- size ----------------------------------------------------------------


SIZE_HEADERS = ["size", "total", "avg_iterations", "first_pass_pct"]


def size_rows(rows: tuple[SizeRow, ...]) -> list[list[str]]:
    out = []
    for r in rows:
        avg = one_decimal(r.avg_iterations)
        if r.avg_is_lower_bound:
            avg = f">={avg}"
        out.append([r.size.label, str(r.total), avg, whole_percent(r.first_pass_pct)])
    return out


def size_csv(rows: tuple[SizeRow, ...]) -> str:
    return _csv(SIZE_HEADERS, size_rows(rows))


def size_figure(rows: tuple[SizeRow, ...], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([r.size.label for r in rows], [r.first_pass_pct for r in rows])
    ax.set_ylabel("first-pass percent")
    ax.set_ylim(0, 100)
    ax.set_title("First-pass rate by package size")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# --- stage presence ---------------------------------------------------------


STAGES_HEADERS = ["stage", "present_pct"]


def stages_rows(presence: dict[Stage, float]) -> list[list[str]]:
    return [[stage.label, trimmed(presence[stage])] for stage in Stage]


def stages_csv(presence: dict[Stage, float]) -> str:
    return _csv(STAGES_HEADERS, stages_rows(presence))


def stages_figure(presence: dict[Stage, float], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([s.label for s in Stage], [presence[s] for s in Stage])
    ax.set_ylabel("percent of records")
    ax.set_ylim(0, 100)
    ax.set_title("Stage presence")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def write_report_files(
    kind: str,
    csv_text: str,
    figure_writer,
    out_dir: Path,
) -> dict[str, Path]:
    """Write <kind>.csv and <kind>.png into out_dir; returns their paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{kind}.csv"
    csv_path.write_text(csv_text, encoding="utf-8")
    png_path = out_dir / f"{kind}.png"
    figure_writer(png_path)
    return {"csv": csv_path, "figure": png_path}
