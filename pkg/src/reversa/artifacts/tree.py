"""Reading the artifact tree back from disk."""

from __future__ import annotations

from pathlib import Path

from .._fs import iter_files
from ..claims import Claim, Gap, parse_claim_lines, parse_gap_lines
from .documents import REGISTRY, ArtifactDocument, ArtifactKind, kind_for_path, split_front_matter
from .records import Question, Task, parse_questions, parse_tasks

K = ArtifactKind


def artifact_paths(output_root: Path) -> list[str]:
    """Output-root-relative paths of every recognized artifact, sorted."""
    return [p for p in iter_files(Path(output_root)) if kind_for_path(p) is not None]


def load_documents(output_root: Path) -> list[ArtifactDocument]:
    output_root = Path(output_root)
    docs = []
    for rel in artifact_paths(output_root):
        text = (output_root / rel).read_text(encoding="utf-8")
        docs.append(ArtifactDocument.from_text(rel, text))
    return docs


def _read(output_root: Path, kind: ArtifactKind) -> str | None:
    path = Path(output_root) / REGISTRY[kind].path
    return path.read_text(encoding="utf-8") if path.is_file() else None


def load_claim_store(output_root: Path) -> list[Claim]:
    """The current claim set.

    Once the reviewer has run, its register inside the confidence report is
    authoritative (it carries reclassifications). Before that, claims are
    gathered from the unit specs and the recovered rules.
    """
    output_root = Path(output_root)
    report = _read(output_root, K.CONFIDENCE_REPORT)
    if report is not None:
        _, body = split_front_matter(report)
        return parse_claim_lines(body)
    claims: list[Claim] = []
    for doc in load_documents(output_root):
        if doc.kind in (K.REQUIREMENTS, K.RULES):
            claims.extend(doc.claims)
    return sorted(claims, key=lambda c: c.id)


def load_gaps(output_root: Path) -> list[Gap]:
    text = _read(output_root, K.GAPS)
    return parse_gap_lines(text) if text else []


def load_questions(output_root: Path) -> list[Question]:
    text = _read(output_root, K.QUESTIONS)
    return parse_questions(text) if text else []


def load_tasks(output_root: Path) -> dict[str, list[Task]]:
    out = {}
    for doc in load_documents(output_root):
        if doc.kind is K.TASKS:
            out[doc.spec_id or doc.path] = parse_tasks(doc.text)
    return out


def spec_units(output_root: Path) -> list[str]:
    """Units that have their own requirements document."""
    return sorted(
        doc.spec_id or doc.path.split("/")[1]
        for doc in load_documents(output_root)
        if doc.kind is K.REQUIREMENTS and doc.path.startswith("specs/")
    )
