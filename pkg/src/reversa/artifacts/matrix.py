"""Traceability matrices (code <-> spec, spec <-> impacted component)."""

from __future__ import annotations

import re
from collections import Counter
from collections.abc import Collection, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from ..claims import Claim, EvidenceRef


class MatrixError(ValueError):
    pass


@dataclass(frozen=True)
class Citation:
    claim_id: str
    spec_id: str
    ref: EvidenceRef


@dataclass
class TraceMatrix:
    rows: list[str]
    cols: list[str]
    cells: dict[tuple[str, str], int] = field(default_factory=dict)
    row_axis: str = "file"
    col_axis: str = "spec"
    citations: list[Citation] = field(default_factory=list, compare=False)

    def __post_init__(self) -> None:
        self.rows = sorted(set(self.rows))
        self.cols = sorted(set(self.cols))
        rows, cols = set(self.rows), set(self.cols)
        for (r, c), n in self.cells.items():
            if r not in rows or c not in cols:
                raise MatrixError(f"cell ({r}, {c}) references an undeclared axis entry")
            if n < 1:
                raise MatrixError(f"cell ({r}, {c}) has evidence count {n} < 1")

    def row_cells(self, row: str) -> dict[str, int]:
        return {c: n for (r, c), n in self.cells.items() if r == row}

    def covered_rows(self) -> list[str]:
        return sorted({r for r, _ in self.cells})

    def uncovered_rows(self) -> list[str]:
        covered = set(self.covered_rows())
        return [r for r in self.rows if r not in covered]

    def to_dict(self) -> dict:
        return {
            "row_axis": self.row_axis,
            "col_axis": self.col_axis,
            "rows": list(self.rows),
            "cols": list(self.cols),
            "cells": [{"row": r, "col": c, "count": n} for (r, c), n in sorted(self.cells.items())],
        }


def build_code_spec_matrix(claims: Iterable[Claim], inventory: Iterable[str] = ()) -> TraceMatrix:
    """Rows are files (cited or inventoried), columns are spec ids; cells count citations."""
    claims = list(claims)
    citations = [Citation(c.id, c.spec_id, ref) for c in claims for ref in c.evidence]
    counts = Counter((cit.ref.path, cit.spec_id) for cit in citations)
    rows = set(inventory) | {cit.ref.path for cit in citations}
    cols = {c.spec_id for c in claims}
    citations.sort(key=lambda c: (c.claim_id, c.ref.path, c.ref.line_start or 0))
    return TraceMatrix(sorted(rows), sorted(cols), dict(counts), "file", "spec", citations)


def build_spec_impact_matrix(
    specs: Iterable[str],
    components: Iterable[str],
    dependency_edges: Iterable[tuple[str, str]],
) -> TraceMatrix:
    specs, components = set(specs), set(components)
    edges = list(dependency_edges)
    dangling = sorted({f"{s} -> {c}" for s, c in edges if s not in specs or c not in components})
    if dangling:
        raise MatrixError("dangling dependency edges: " + ", ".join(dangling))
    return TraceMatrix(sorted(specs), sorted(components), dict(Counter(edges)), "spec", "component")


@dataclass(frozen=True)
class DeadLink:
    claim_id: str
    path: str
    reason: str


def detect_dead_links(
    matrix: TraceMatrix,
    existing_files: Collection[str],
    line_counts: Mapping[str, int] | None = None,
) -> list[DeadLink]:
    """Evidence references whose file is gone, or whose line range runs past the file end."""
    dead = set()
    for cit in matrix.citations:
        ref = cit.ref
        if ref.path not in existing_files:
            dead.add(DeadLink(cit.claim_id, ref.path, "file not found"))
            continue
        if line_counts is not None and ref.line_start is not None and ref.path in line_counts:
            last = ref.line_end if ref.line_end is not None else ref.line_start
            if last > line_counts[ref.path]:
                dead.add(DeadLink(cit.claim_id, ref.path, "range out of bounds"))
    return sorted(dead, key=lambda d: (d.claim_id, d.path, d.reason))


def _esc(text: str) -> str:
    return text.replace("|", "\\|")


def _unesc(text: str) -> str:
    return text.replace("\\|", "|")


def render_matrix(matrix: TraceMatrix) -> str:
    header = [matrix.row_axis] + matrix.cols
    lines = [
        "| " + " | ".join(_esc(h) for h in header) + " |",
        "|" + "---|" + "---:|" * len(matrix.cols),
    ]
    for r in matrix.rows:
        cells = [str(matrix.cells[(r, c)]) if (r, c) in matrix.cells else "" for c in matrix.cols]
        lines.append("| " + " | ".join([_esc(r)] + cells) + " |")
    return "\n".join(lines) + "\n"


def _split_row(line: str) -> list[str]:
    line = line.strip()
    if not (line.startswith("|") and line.endswith("|")) or len(line) < 2:
        raise MatrixError(f"not a table row: {line!r}")
    return [_unesc(p.strip()) for p in re.split(r"(?<!\\)\|", line[1:-1])]


def parse_matrix(text: str, col_axis: str = "spec") -> TraceMatrix:
    """Inverse of :func:`render_matrix` (citation provenance is not recoverable)."""
    lines = [ln for ln in text.splitlines() if ln.strip().startswith("|")]
    if len(lines) < 2:
        raise MatrixError("matrix table needs a header and separator row")
    header = _split_row(lines[0])
    row_axis, cols = header[0], header[1:]
    rows, cells = [], {}
    for line in lines[2:]:
        values = _split_row(line)
        if len(values) != len(header):
            raise MatrixError(f"row has {len(values)} cells, header has {len(header)}: {line!r}")
        row = values[0]
        rows.append(row)
        for col, val in zip(cols, values[1:]):
            if val:
                try:
                    cells[(row, col)] = int(val)
                except ValueError:
                    raise MatrixError(f"non-integer cell ({row}, {col}): {val!r}") from None
    return TraceMatrix(rows, cols, cells, row_axis, col_axis)


def edges_of(matrix: TraceMatrix) -> Sequence[tuple[str, str]]:
    return sorted(matrix.cells)
