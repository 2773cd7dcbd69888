"""Agent teams and their roles."""

from __future__ import annotations

from dataclasses import dataclass

from .artifacts import ArtifactKind

K = ArtifactKind

ORCHESTRATOR = "reversa"


@dataclass(frozen=True)
class TeamDescriptor:
    id: str
    agents: tuple[str, ...]
    templates: tuple[ArtifactKind, ...]
    requires: tuple[str, ...] = ()


DISCOVERY = TeamDescriptor(
    "discovery",
    ("scout", "archaeologist", "detective", "architect", "writer", "reviewer"),
    (
        K.INVENTORY,
        K.ANALYSIS,
        K.RULES,
        K.ARCHITECTURE,
        K.DOMAIN_MODEL,
        K.STATE_MACHINES,
        K.DEPENDENCIES,
        K.QUESTIONS,
        K.GAPS,
        K.CONFIDENCE_REPORT,
        K.REQUIREMENTS,
        K.DESIGN,
        K.TASKS,
        K.CODE_SPEC_MATRIX,
        K.SPEC_IMPACT_MATRIX,
    ),
)

MIGRATION = TeamDescriptor(
    "migration",
    ("migration-briefer", "migration-strategist", "migration-architect", "migration-parity", "migration-handoff"),
    (K.MIGRATION_DOC, K.PARITY_FEATURE),
    requires=("discovery",),
)

CODE_FORWARD = TeamDescriptor(
    "code-forward",
    ("forward-intake", "forward-planner", "forward-auditor"),
    (K.REQUIREMENTS, K.DESIGN, K.TASKS, K.SPEC_IMPACT_MATRIX),
    requires=("discovery",),
)

TEAMS: dict[str, TeamDescriptor] = {t.id: t for t in (DISCOVERY, MIGRATION, CODE_FORWARD)}

# named as teams by the framework but without a defined workflow
NOT_IMPLEMENTED = ("pricing", "translation")


class UnknownTeamError(KeyError):
    def __str__(self) -> str:
        return str(self.args[0])


def get_team(team_id: str) -> TeamDescriptor:
    if team_id in TEAMS:
        return TEAMS[team_id]
    if team_id in NOT_IMPLEMENTED:
        raise UnknownTeamError(f"team not implemented: {team_id}")
    raise UnknownTeamError(f"unknown team {team_id!r}; known teams: {', '.join(TEAMS)}")


def all_roles() -> list[str]:
    return [ORCHESTRATOR] + [a for t in TEAMS.values() for a in t.agents]
