"""Stage plans for each team."""

from __future__ import annotations

import fnmatch
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

from ..artifacts import REGISTRY, ArtifactKind
from ..teams import TeamDescriptor, get_team

K = ArtifactKind

# code-forward specs live beside the recovered ones under this unit id
FORWARD_UNIT = "forward"
PARITY_GLOB = "migration/parity/*.feature"


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class OutputSlot:
    kind: ArtifactKind
    path: str

    @property
    def is_glob(self) -> bool:
        return "*" in self.path

    def matches(self, path: str) -> bool:
        return fnmatch.fnmatchcase(path, self.path) if self.is_glob else path == self.path


@dataclass(frozen=True)
class StageSpec:
    id: str
    agent_role: str
    inputs: tuple[ArtifactKind, ...]
    outputs: tuple[OutputSlot, ...]
    unit: str | None = None
    # kinds read when present but not required
    context: tuple[ArtifactKind, ...] = ()

    def __post_init__(self) -> None:
        if not self.outputs:
            raise PlanError(f"stage {self.id} declares no outputs")

    @property
    def instructions(self) -> str:
        return f"payload/skills/{self.agent_role}.md"

    @property
    def output_kinds(self) -> tuple[ArtifactKind, ...]:
        return tuple(dict.fromkeys(s.kind for s in self.outputs))


def _slot(kind: ArtifactKind, unit: str | None = None, name: str | None = None) -> OutputSlot:
    return OutputSlot(kind, REGISTRY[kind].path_for(unit, name))


def _discovery(units: Sequence[str]) -> list[StageSpec]:
    base = (K.INVENTORY, K.ANALYSIS, K.RULES, K.ARCHITECTURE)
    stages = [
        StageSpec("scout", "scout", (), (_slot(K.INVENTORY),)),
        StageSpec("archaeologist", "archaeologist", (K.INVENTORY,), (_slot(K.ANALYSIS),)),
        StageSpec("detective", "detective", (K.INVENTORY, K.ANALYSIS), (_slot(K.RULES),)),
        StageSpec(
            "architect",
            "architect",
            (K.INVENTORY, K.ANALYSIS, K.RULES),
            tuple(
                _slot(k) for k in (K.ARCHITECTURE, K.DOMAIN_MODEL, K.STATE_MACHINES, K.DEPENDENCIES, K.SPEC_IMPACT_MATRIX)
            ),
        ),
    ]
    for unit in units:
        stages.append(
            StageSpec(
                f"writer:{unit}",
                "writer",
                base,
                (_slot(K.REQUIREMENTS, unit), _slot(K.DESIGN, unit), _slot(K.TASKS, unit)),
                unit=unit,
                context=(K.REQUIREMENTS,),
            )
        )
    stages.append(
        StageSpec(
            "reviewer",
            "reviewer",
            (K.INVENTORY, K.RULES, K.REQUIREMENTS) if units else (K.INVENTORY, K.RULES),
            (_slot(K.QUESTIONS), _slot(K.GAPS), _slot(K.CONFIDENCE_REPORT), _slot(K.CODE_SPEC_MATRIX)),
            context=(K.QUESTIONS, K.GAPS),
        )
    )
    return stages


def _migration() -> list[StageSpec]:
    discovery = (K.REQUIREMENTS, K.RULES, K.GAPS, K.CONFIDENCE_REPORT)

    def docs(*names: str) -> tuple[OutputSlot, ...]:
        return tuple(_slot(K.MIGRATION_DOC, name=n) for n in names)

    return [
        StageSpec("migration-briefer", "migration-briefer", discovery, docs("briefing")),
        StageSpec(
            "migration-strategist", "migration-strategist", discovery + (K.MIGRATION_DOC,), docs("strategy", "risks", "cutover-plan")
        ),
        StageSpec(
            "migration-architect",
            "migration-architect",
            discovery + (K.MIGRATION_DOC,),
            docs("target-architecture", "domain-model", "data-model", "data-migration"),
        ),
        StageSpec("migration-parity", "migration-parity", discovery + (K.MIGRATION_DOC,), (OutputSlot(K.PARITY_FEATURE, PARITY_GLOB),)),
        StageSpec("migration-handoff", "migration-handoff", discovery + (K.MIGRATION_DOC, K.PARITY_FEATURE), docs("handoff")),
    ]


def _code_forward() -> list[StageSpec]:
    specs = (K.REQUIREMENTS, K.DEPENDENCIES)
    return [
        StageSpec("forward-intake", "forward-intake", specs, (_slot(K.REQUIREMENTS, FORWARD_UNIT),)),
        StageSpec(
            "forward-planner",
            "forward-planner",
            specs,
            (_slot(K.DESIGN, FORWARD_UNIT), _slot(K.TASKS, FORWARD_UNIT)),
        ),
        StageSpec(
            "forward-auditor",
            "forward-auditor",
            specs + (K.TASKS,),
            (OutputSlot(K.SPEC_IMPACT_MATRIX, "traceability/forward-impact-matrix.md"),),
        ),
    ]


def plan_stages(team: TeamDescriptor | str, units: Mapping[str, Sequence[str]] | Sequence[str] = ()) -> list[StageSpec]:
    """Ordered stages for ``team``. Only discovery depends on ``units``: the
    writer runs once per unit, every other stage once per project."""
    if isinstance(team, str):
        team = get_team(team)
    if team.id == "discovery":
        return _discovery(list(units))
    if team.id == "migration":
        return _migration()
    if team.id == "code-forward":
        return _code_forward()
    raise PlanError(f"no stage plan for team {team.id!r}")  # pragma: no cover


def check_plan(stages: Sequence[StageSpec], available: Sequence[ArtifactKind] = ()) -> None:
    """Stage ids are unique and every required input is produced by an earlier
    stage or is in ``available`` (kinds left behind by a previous team)."""
    ids = [s.id for s in stages]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise PlanError(f"duplicate stage ids: {', '.join(dupes)}")
    have = set(available)
    for s in stages:
        missing = [k.value for k in s.inputs if k not in have]
        if missing:
            raise PlanError(f"stage {s.id} consumes {', '.join(missing)} before any stage produces it")
        have.update(s.output_kinds)


DISCOVERY_KINDS = tuple(k for s in _discovery(["u"]) for k in s.output_kinds)


def render_plan(team: str, stages: Sequence[StageSpec]) -> str:
    lines = ["# Plan", "", f"Team: {team}", "", "| # | Stage | Role | Outputs |", "|---:|---|---|---|"]
    for i, s in enumerate(stages, 1):
        lines.append(f"| {i} | {s.id} | {s.agent_role} | {', '.join(o.path for o in s.outputs)} |")
    return "\n".join(lines) + "\n"
