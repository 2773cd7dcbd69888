"""Evaluation metrics over an artifact set, task tracking and the audit package."""

from __future__ import annotations

import json
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from datetime import datetime
from fractions import Fraction
from pathlib import Path

from . import __version__
from ._fs import STATE_DIR, atomic_write, canonical_json
from .artifacts import (
    REGISTRY,
    ArtifactKind,
    Task,
    TaskStatus,
    TraceMatrix,
    build_code_spec_matrix,
    kind_for_path,
    parse_gherkin_summary,
    parse_matrix,
    parse_tasks,
)
from .artifacts.documents import split_front_matter
from .artifacts.tree import artifact_paths, load_claim_store, load_gaps, load_questions, load_tasks, spec_units
from .claims import Claim, blocking_gaps, confidence_index, count_statuses
from .config import CONFIG_PATH, USER_CONFIG_PATH, Config, load_config
from .manifest import compute_digest
from .pipeline.bundle import repository_files
from .pipeline.state import StageStatus, load_state

K = ArtifactKind
NOT_MEASURED = "not measured"
AUDIT_DIR = "audit"
INDEX_NAME = "package-index.json"


class MetricsError(ValueError):
    pass


def file_coverage(inventory: Iterable[str], matrix: TraceMatrix) -> Fraction:
    """Share of relevant files with at least one citation in the code-spec matrix."""
    files = set(inventory)
    if not files:
        raise MetricsError("no relevant files")
    return Fraction(len(files & set(matrix.covered_rows())), len(files))


def unit_coverage(units: Iterable[str], specs: Iterable[str]) -> Fraction:
    """Share of declared units that have their own requirements document."""
    units = set(units)
    if not units:
        raise MetricsError("no units declared")
    return Fraction(len(units & set(specs)), len(units))


def traceability_density(evidence_counts: Iterable[int]) -> Fraction:
    """Mean number of evidence references per requirement, rule or task."""
    counts = list(evidence_counts)
    if not counts:
        raise MetricsError("no requirements, rules or tasks to measure")
    return Fraction(sum(counts), len(counts))


def render_fraction(value: Fraction, places: int = 2) -> str:
    """Half-up decimal rendering of an exact ratio."""
    scaled = value * 10**places
    whole, rest = divmod(scaled.numerator, scaled.denominator)
    if 2 * rest >= scaled.denominator:
        whole += 1
    sign = "-" if whole < 0 else ""
    whole = abs(whole)
    return f"{sign}{whole // 10**places}.{whole % 10**places:0{places}d}"


@dataclass
class TaskStatusSummary:
    tasks: list[Task]

    @property
    def counts(self) -> dict[str, int]:
        c = Counter(t.status for t in self.tasks)
        return {s.value: c[s] for s in TaskStatus}

    def to_dict(self) -> dict:
        return {
            "counts": self.counts,
            "total": len(self.tasks),
            "tasks": [{"id": t.id, "title": t.title, "status": t.status.value} for t in self.tasks],
        }


def _task_key(task: Task) -> tuple[int, str]:
    return int(task.id.split("-", 1)[1]), task.id


def summarize_tasks(tasks: str | Iterable[Task]) -> TaskStatusSummary:
    """Counts by status; accepts a tasks document or already-parsed tasks."""
    if isinstance(tasks, str):
        tasks = parse_tasks(split_front_matter(tasks)[1])
    return TaskStatusSummary(sorted(tasks, key=_task_key))


@dataclass
class MetricsReport:
    file_coverage: Fraction
    unit_coverage: Fraction
    traceability_density: Fraction
    confidence_distribution: tuple[int, int, int, float]
    blocking_gap_count: int
    stage_seconds: dict[str, float] = field(default_factory=dict)
    question_count: int = 0
    human_interactions: int = 0
    artifact_bytes: int = 0
    tasks: dict[str, int] = field(default_factory=dict)
    expert_precision: str = NOT_MEASURED
    agent_utility: str = NOT_MEASURED

    def to_dict(self) -> dict:
        c, i, g, index = self.confidence_distribution
        return {
            "file_coverage": render_fraction(self.file_coverage),
            "unit_coverage": render_fraction(self.unit_coverage),
            "traceability_density": render_fraction(self.traceability_density),
            "confidence_distribution": {"confirmed": c, "inferred": i, "gap": g, "index": index},
            "blocking_gaps": self.blocking_gap_count,
            "cost": {
                "stage_seconds": dict(self.stage_seconds),
                "questions": self.question_count,
                "human_interactions": self.human_interactions,
                "artifact_bytes": self.artifact_bytes,
            },
            "tasks": dict(self.tasks),
            "expert_precision": self.expert_precision,
            "agent_utility": self.agent_utility,
        }

    def render_markdown(self) -> str:
        d = self.to_dict()
        dist = d["confidence_distribution"]
        rows = [
            ("File coverage", d["file_coverage"]),
            ("Unit coverage", d["unit_coverage"]),
            ("Traceability density", d["traceability_density"]),
            ("Confidence distribution", f"{dist['confirmed']} / {dist['inferred']} / {dist['gap']} ({dist['index']:.1f}%)"),
            ("Blocking gaps", str(self.blocking_gap_count)),
            ("Questions raised", str(self.question_count)),
            ("Human interactions", str(self.human_interactions)),
            ("Artifact bytes", str(self.artifact_bytes)),
            ("Expert precision", self.expert_precision),
            ("Agent utility", self.agent_utility),
        ]
        lines = ["# Metrics", "", "| Metric | Value |", "|---|---|"]
        lines += [f"| {k} | {v} |" for k, v in rows]
        return "\n".join(lines) + "\n"


def _seconds(start: str | None, end: str | None) -> float | None:
    if not start or not end:
        return None
    parse = lambda s: datetime.fromisoformat(s.replace("Z", "+00:00"))  # noqa: E731
    try:
        return (parse(end) - parse(start)).total_seconds()
    except ValueError:
        return None


def _code_spec_matrix(output_root: Path, claims: Sequence[Claim]) -> TraceMatrix:
    path = output_root / REGISTRY[K.CODE_SPEC_MATRIX].path
    if path.is_file():
        text = split_front_matter(path.read_text(encoding="utf-8"))[1]
        return parse_matrix(text)
    return build_code_spec_matrix(claims)


def density_items(output_root: Path) -> list[int]:
    """Evidence counts of every requirement, rule and task."""
    claims = load_claim_store(output_root)
    tasks = [t for ts in load_tasks(output_root).values() for t in ts]
    return [len(c.evidence) for c in claims] + [len(t.evidence) for t in tasks]


def compute_metrics(root: Path, cfg: Config | None = None) -> MetricsReport:
    root = Path(root)
    cfg = cfg or load_config(root)
    output_root = root / cfg.output_root
    inventory = cfg.relevant_files(repository_files(root, cfg))
    units = cfg.resolve_units(inventory)
    claims = load_claim_store(output_root)
    c, i, g = count_statuses(claims)
    index = confidence_index(c, i, g, cfg.weights) if claims else 0.0
    questions = load_questions(output_root)
    state = load_state(root)
    tasks = [t for ts in load_tasks(output_root).values() for t in ts]
    return MetricsReport(
        file_coverage=file_coverage(inventory, _code_spec_matrix(output_root, claims)),
        unit_coverage=unit_coverage(units, spec_units(output_root)),
        traceability_density=traceability_density(density_items(output_root)),
        confidence_distribution=(c, i, g, index),
        blocking_gap_count=len(blocking_gaps(load_gaps(output_root))),
        stage_seconds={
            r.id: s for r in state.stages if (s := _seconds(r.started_at, r.finished_at)) is not None
        },
        question_count=len(questions),
        human_interactions=sum(1 for q in questions if q.status.value == "answered"),
        artifact_bytes=sum((output_root / p).stat().st_size for p in artifact_paths(output_root)),
        tasks=summarize_tasks(tasks).counts,
    )


# --- audit package -----------------------------------------------------------


def _entry(root: Path, rel: str) -> dict:
    data = (root / rel).read_bytes()
    return {"path": rel, "sha256": compute_digest(data), "bytes": len(data)}


def assemble_audit_package(root: Path, *, dry_run: bool = False) -> dict:
    """Write the metrics report and a deterministic package index under
    ``<output root>/audit/`` and return the index.

    Fails if any required category is absent rather than emitting a partial
    package.
    """
    root = Path(root)
    cfg = load_config(root)
    out_rel = cfg.output_root
    output_root = root / out_rel
    state = load_state(root)
    if not any(r.status is StageStatus.DONE for r in state.stages):
        raise MetricsError("package incomplete: no pipeline stage has run")
    required = {
        "configuration": root / CONFIG_PATH,
        "confidence report": output_root / REGISTRY[K.CONFIDENCE_REPORT].path,
        "gap register": output_root / REGISTRY[K.GAPS].path,
    }
    missing = [name for name, path in required.items() if not path.is_file()]
    if missing:
        raise MetricsError("package incomplete: " + ", ".join(missing))

    meta_path = root / STATE_DIR / "install-meta.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.is_file() else {}
    project = cfg.raw.get("project", {})
    paths = [f"{out_rel}/{p}" for p in artifact_paths(output_root)]
    parity = [p for p in paths if kind_for_path(p[len(out_rel) + 1 :]) is K.PARITY_FEATURE]
    task_docs = [p for p in paths if kind_for_path(p[len(out_rel) + 1 :]) is K.TASKS]

    report = compute_metrics(root, cfg)
    metrics_json = canonical_json(report.to_dict())
    metrics_md = report.render_markdown().encode()
    audit_rel = f"{out_rel}/{AUDIT_DIR}"
    if not dry_run:
        atomic_write(root / audit_rel / "metrics.json", metrics_json)
        atomic_write(root / audit_rel / "metrics.md", metrics_md)

    def digest_of(rel: str, data: bytes) -> dict:
        return {"path": rel, "sha256": compute_digest(data), "bytes": len(data)}

    config_files = [CONFIG_PATH] + ([USER_CONFIG_PATH] if (root / USER_CONFIG_PATH).is_file() else [])
    index = {
        "package_version": 1,
        "tool_version": __version__,
        "project": {
            "name": project.get("name") or meta.get("project", {}).get("name", ""),
            "analyzed_version": project.get("analyzed_version") or meta.get("project", {}).get("analyzed_version", ""),
        },
        "configuration": [_entry(root, p) for p in config_files],
        "engines": list(meta.get("engines", [])),
        "teams": list(meta.get("teams", [])),
        "pipeline": {
            "team": state.team,
            "stages": [{"id": r.id, "status": r.status.value} for r in state.stages],
        },
        "artifacts": [_entry(root, p) for p in paths],
        "reports": {
            "confidence": _entry(root, f"{out_rel}/{REGISTRY[K.CONFIDENCE_REPORT].path}"),
            "gaps": _entry(root, f"{out_rel}/{REGISTRY[K.GAPS].path}"),
            "metrics": [
                digest_of(f"{audit_rel}/metrics.json", metrics_json),
                digest_of(f"{audit_rel}/metrics.md", metrics_md),
            ],
        },
        "parity_scenarios": {
            "features": [_entry(root, p) for p in parity],
            "scenarios": sum(parse_gherkin_summary((root / p).read_text(encoding="utf-8")).scenario_count for p in parity),
        },
        "task_plan": [_entry(root, p) for p in task_docs],
    }
    if not dry_run:
        atomic_write(root / audit_rel / INDEX_NAME, canonical_json(index))
    return index


def verify_audit_package(root: Path, index: dict) -> list[str]:
    """Paths whose current digest no longer matches the index."""
    root = Path(root)
    entries = list(index["configuration"]) + list(index["artifacts"]) + list(index["task_plan"])
    entries += [index["reports"]["confidence"], index["reports"]["gaps"], *index["reports"]["metrics"]]
    entries += list(index["parity_scenarios"]["features"])
    bad = []
    for e in entries:
        p = root / e["path"]
        if not p.is_file() or compute_digest(p.read_bytes()) != e["sha256"]:
            bad.append(e["path"])
    return sorted(set(bad))
