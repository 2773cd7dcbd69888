"""The self-contained task bundle handed to an executor."""

from __future__ import annotations

import json
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .._fs import STATE_DIR, canonical_json, iter_files
from ..artifacts import REGISTRY, ArtifactKind
from ..artifacts.documents import kind_for_path
from ..artifacts.tree import artifact_paths
from ..config import Config
from ..installer import skill_text
from ..manifest import compute_digest
from .stages import StageSpec

_IGNORED_DIRS = (STATE_DIR, ".git")


@dataclass(frozen=True)
class EvidenceFile:
    path: str
    sha256: str
    bytes: int
    lines: int
    # None once the bundle's byte budget is spent
    content: str | None = None


@dataclass
class TaskBundle:
    stage_id: str
    role: str
    instructions: str
    unit: str | None
    units: dict[str, list[str]]
    evidence: list[EvidenceFile]
    repository_files: dict[str, int]
    prior_artifacts: dict[str, str]
    expected_outputs: list[tuple[str, str]]
    byte_budget: int
    timeout_seconds: float
    intent: str = ""
    truncated: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["expected_outputs"] = [{"kind": k, "path": p} for k, p in self.expected_outputs]
        return d

    def to_json(self) -> bytes:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: Mapping) -> "TaskBundle":
        d = dict(d)
        d["evidence"] = [EvidenceFile(**e) for e in d["evidence"]]
        d["expected_outputs"] = [(e["kind"], e["path"]) for e in d["expected_outputs"]]
        return cls(**d)

    @classmethod
    def from_json(cls, data: bytes | str) -> "TaskBundle":
        return cls.from_dict(json.loads(data))

    def prior(self, kind: ArtifactKind) -> dict[str, str]:
        return {p: t for p, t in self.prior_artifacts.items() if kind_for_path(p) is kind}


def repository_files(root: Path, cfg: Config) -> list[str]:
    """Project files outside the tool's own directories."""
    skip = _IGNORED_DIRS + (cfg.output_root,)
    return [p for p in iter_files(root) if not any(p == d or p.startswith(d + "/") for d in skip)]


def _read(root: Path, rel: str) -> tuple[str, bytes]:
    return rel, (root / rel).read_bytes()


def _line_count(data: bytes) -> int:
    return data.count(b"\n") + (1 if data and not data.endswith(b"\n") else 0)


def build_bundle(stage: StageSpec, root: Path, cfg: Config, units: Mapping[str, list[str]]) -> TaskBundle:
    root = Path(root)
    repo = repository_files(root, cfg)
    relevant = cfg.relevant_files(repo)
    wanted = list(units.get(stage.unit, [])) if stage.unit else relevant
    # pure reads; safe to fan out
    with ThreadPoolExecutor(max_workers=8) as pool:
        blobs = dict(pool.map(lambda p: _read(root, p), repo))

    evidence, truncated, budget = [], [], cfg.byte_budget
    for path in wanted:
        data = blobs[path]
        content = None
        if len(data) <= budget:
            content = data.decode("utf-8", errors="replace")
            budget -= len(data)
        else:
            truncated.append(path)
        evidence.append(EvidenceFile(path, compute_digest(data), len(data), _line_count(data), content))

    output_root = root / cfg.output_root
    kinds = set(stage.inputs) | set(stage.context)
    # a per-unit stage sees sibling unit documents only from units planned
    # before it, so its inputs do not depend on leftovers from earlier runs
    order = list(units)
    earlier = set(order[: order.index(stage.unit)]) if stage.unit in order else None
    prior = {}
    for rel in artifact_paths(output_root):
        kind = kind_for_path(rel)
        if kind not in kinds:
            continue
        if earlier is not None and REGISTRY[kind].unit_level and rel.split("/")[1] not in earlier | {stage.unit}:
            continue
        prior[rel] = (output_root / rel).read_text(encoding="utf-8")

    return TaskBundle(
        stage_id=stage.id,
        role=stage.agent_role,
        instructions=skill_text(stage.agent_role).decode("utf-8"),
        unit=stage.unit,
        units={u: list(fs) for u, fs in units.items()},
        evidence=evidence,
        repository_files={p: _line_count(blobs[p]) for p in repo},
        prior_artifacts=prior,
        expected_outputs=[(s.kind.value, s.path) for s in stage.outputs],
        byte_budget=cfg.byte_budget,
        timeout_seconds=cfg.timeout_seconds,
        intent=cfg.intent,
        truncated=truncated,
    )
