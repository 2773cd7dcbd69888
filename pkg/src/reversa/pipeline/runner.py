"""Resumable execution of a stage plan."""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping, Sequence
from pathlib import Path

from .._fs import STATE_DIR, ProjectLock, atomic_write, iter_files, resolve_under, utc_now
from ..artifacts import REGISTRY, ArtifactDocument, ArtifactError, ArtifactKind, kind_for_path, validate_artifact
from ..artifacts.tree import artifact_paths
from ..config import Config, load_config
from ..manifest import refresh_entries
from ..teams import get_team
from .bundle import build_bundle, repository_files
from .executors import Executor, ExecutorError
from .stages import DISCOVERY_KINDS, StageSpec, check_plan, plan_stages, render_plan
from .state import STATE_PATH, PipelineState, StageStatus, StateError, load_state, save_state

logger = logging.getLogger(__name__)

PLAN_PATH = f"{STATE_DIR}/plan.md"
Clock = Callable[[], str]
S = StageStatus


class PipelineError(RuntimeError):
    pass


class PlanDriftError(PipelineError):
    pass


class StageFailure(Exception):
    """Internal: carries the diagnostic recorded on the failed stage."""


def _available_kinds(output_root: Path) -> set[ArtifactKind]:
    return {k for k in (kind_for_path(p) for p in artifact_paths(output_root)) if k is not None}


def _match_outputs(stage: StageSpec, docs: Sequence[ArtifactDocument]) -> None:
    unexpected, wrong_kind = [], []
    filled = {id(slot): False for slot in stage.outputs}
    seen = set()
    for doc in docs:
        if doc.path in seen:
            raise StageFailure(f"duplicate output {doc.path}")
        seen.add(doc.path)
        slot = next((s for s in stage.outputs if s.matches(doc.path)), None)
        if slot is None:
            unexpected.append(doc.path)
        elif doc.kind is not slot.kind:
            wrong_kind.append(f"{doc.path} is {doc.kind.value}, expected {slot.kind.value}")
        else:
            filled[id(slot)] = True
    if wrong_kind:
        raise StageFailure("wrong output kind: " + "; ".join(wrong_kind))
    if unexpected:
        raise StageFailure("unexpected outputs: " + ", ".join(sorted(unexpected)))
    missing = [s.path for s in stage.outputs if not filled[id(s)]]
    if missing:
        raise StageFailure("incomplete outputs: " + ", ".join(missing))


def _write_outputs(stage: StageSpec, docs: Sequence[ArtifactDocument], output_root: Path) -> list[str]:
    """Write every output or none of them."""
    writes = {d.path: d.data() for d in docs}
    removes = []
    for slot in stage.outputs:
        if slot.is_glob:
            # outputs of an earlier run of this stage that are not produced again
            removes += [p for p in iter_files(output_root) if slot.matches(p) and p not in writes]
    undo: list[tuple[Path, bytes | None]] = []
    try:
        for rel, data in sorted(writes.items()):
            target = resolve_under(output_root, rel)
            undo.append((target, target.read_bytes() if target.is_file() else None))
            atomic_write(target, data)
        for rel in removes:
            target = resolve_under(output_root, rel)
            undo.append((target, target.read_bytes()))
            target.unlink()
    except (OSError, ValueError) as exc:
        for target, before in reversed(undo):
            try:
                if before is None:
                    target.unlink(missing_ok=True)
                else:
                    atomic_write(target, before)
            except OSError:  # pragma: no cover - best effort
                logger.error("could not restore %s", target)
        raise StageFailure(f"write failed: {exc}") from None
    return sorted(writes)


def execute_stage(
    stage: StageSpec,
    executor: Executor,
    state: PipelineState,
    root: Path,
    *,
    cfg: Config | None = None,
    units: Mapping[str, list[str]] | None = None,
    force: bool = False,
    clock: Clock = utc_now,
) -> PipelineState:
    """Run one stage and persist every state transition.

    A done stage is left alone unless ``force``. A failed stage is retried. A
    stage still marked running belongs to an interrupted run: it is failed and
    then retried. Outputs are validated before anything is written.
    """
    root = Path(root)
    cfg = cfg or load_config(root)
    units = units if units is not None else _units(root, cfg)
    output_root = root / cfg.output_root
    rec = state.record(stage.id)

    if rec.status is S.DONE and not force:
        return state
    if rec.status is S.RUNNING:
        state.transition(stage.id, S.FAILED, clock(), diagnostic="interrupted")
    if rec.status in (S.DONE, S.FAILED):
        state.transition(stage.id, S.PENDING, clock())

    state.transition(stage.id, S.RUNNING, clock())
    save_state(root, state)
    try:
        missing = [k.value for k in stage.inputs if k not in _available_kinds(output_root)]
        if missing:
            raise StageFailure("missing inputs: " + ", ".join(missing))
        bundle = build_bundle(stage, root, cfg, units)
        try:
            docs = executor.execute(bundle)
        except (ExecutorError, ArtifactError) as exc:
            raise StageFailure(str(exc)) from None
        _match_outputs(stage, docs)
        for doc in docs:
            report = validate_artifact(doc, escalate_unevidenced=cfg.escalate_unevidenced)
            if not report.ok:
                raise StageFailure(f"invalid output {doc.path}: {report.errors[0].code}: {report.errors[0].message}")
        outputs = _write_outputs(stage, docs, output_root)
    except StageFailure as exc:
        state.transition(stage.id, S.FAILED, clock(), diagnostic=str(exc))
        save_state(root, state)
        logger.warning("stage %s failed: %s", stage.id, exc)
        return state
    rec.outputs = [f"{cfg.output_root}/{p}" for p in outputs]
    state.transition(stage.id, S.DONE, clock())
    save_state(root, state)
    return state


def _units(root: Path, cfg: Config) -> dict[str, list[str]]:
    return cfg.resolve_units(cfg.relevant_files(repository_files(root, cfg)))


def align_state(state: PipelineState, team: str, plan: Sequence[StageSpec], *, replan: bool = False) -> bool:
    """Make ``state`` track ``plan``; return True if it was (re)initialised.

    Raises :class:`PlanDriftError` when the recorded stages belong to a
    different plan and ``replan`` is not set.
    """
    ids = [s.id for s in plan]
    current = [r.id for r in state.stages]
    if state.team == team and current == ids:
        return False
    if not state.stages or (state.team != team and state.all_done()):
        state.reset(team, ids)
        return True
    if replan:
        keep = [r for r in state.stages if r.status is S.DONE and state.team == team]
        state.reset(team, ids, keep=keep)
        return True
    if state.team != team:
        raise PlanDriftError(f"plan drift: team {state.team} has unfinished stages; finish it or pass --replan")
    raise PlanDriftError(
        f"plan drift: state has stages [{', '.join(current)}], plan has [{', '.join(ids)}]; pass --replan"
    )


def run_pipeline(
    plan: Sequence[StageSpec],
    executor: Executor,
    state: PipelineState,
    root: Path,
    *,
    team: str = "discovery",
    cfg: Config | None = None,
    units: Mapping[str, list[str]] | None = None,
    force: bool = False,
    replan: bool = False,
    clock: Clock = utc_now,
) -> PipelineState:
    """Execute pending stages in order, stopping at the first failure.

    Safe to call again after an interruption: finished stages are skipped.
    """
    root = Path(root)
    cfg = cfg or load_config(root)
    units = units if units is not None else _units(root, cfg)
    if align_state(state, team, plan, replan=replan):
        save_state(root, state)
    if len(state.running()) > 1:  # pragma: no cover - guarded by from_dict
        raise StateError("more than one running stage")
    for stage in plan:
        execute_stage(stage, executor, state, root, cfg=cfg, units=units, force=force, clock=clock)
        if state.record(stage.id).status is S.FAILED:
            break
    return state


def run_team(
    root: Path,
    team_id: str,
    executor: Executor,
    *,
    force: bool = False,
    replan: bool = False,
    clock: Clock = utc_now,
    break_lock: bool = False,
) -> PipelineState:
    """Plan ``team`` from the project configuration and run it under the project lock."""
    root = Path(root)
    team = get_team(team_id)
    cfg = load_config(root)
    units = _units(root, cfg)
    if team.requires and not (root / cfg.output_root / REGISTRY[ArtifactKind.CONFIDENCE_REPORT].path).is_file():
        raise PipelineError(f"team {team.id} needs a completed discovery run first")
    plan = plan_stages(team, units)
    check_plan(plan, DISCOVERY_KINDS if team.requires else ())
    with ProjectLock(root, break_stale=break_lock):
        try:
            state = load_state(root)
            state = run_pipeline(
                plan, executor, state, root, team=team.id, cfg=cfg, units=units, force=force, replan=replan, clock=clock
            )
            mirror = render_plan(team.id, plan).encode()
            plan_file = root / PLAN_PATH
            if not plan_file.is_file() or plan_file.read_bytes() != mirror:
                atomic_write(plan_file, mirror)
        finally:
            # both files are tool-owned runtime state
            refresh_entries(root, [STATE_PATH, PLAN_PATH])
    return state
