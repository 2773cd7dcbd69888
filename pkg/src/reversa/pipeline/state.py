"""Persisted pipeline state (``.reversa/state.json``) and its transition rules."""

from __future__ import annotations

import enum
import json
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .._fs import STATE_DIR, atomic_write, canonical_json

STATE_PATH = f"{STATE_DIR}/state.json"
STATE_VERSION = 1


class StateError(RuntimeError):
    pass


class StageStatus(str, enum.Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


S = StageStatus
# done -> pending only happens for a forced rerun
ALLOWED = {
    S.PENDING: {S.RUNNING},
    S.RUNNING: {S.DONE, S.FAILED},
    S.FAILED: {S.PENDING},
    S.DONE: {S.PENDING},
}


@dataclass
class StageRecord:
    id: str
    status: StageStatus = StageStatus.PENDING
    started_at: str | None = None
    finished_at: str | None = None
    outputs: list[str] = field(default_factory=list)
    diagnostic: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "status": self.status.value,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "outputs": list(self.outputs),
            "diagnostic": self.diagnostic,
        }


@dataclass
class PipelineState:
    team: str | None = None
    stages: list[StageRecord] = field(default_factory=list)
    log: list[dict] = field(default_factory=list)
    # resume_token as last read from or written to disk
    persisted_token: int | None = field(default=None, compare=False)

    @property
    def resume_token(self) -> int:
        return len(self.log)

    def record(self, stage_id: str) -> StageRecord:
        for r in self.stages:
            if r.id == stage_id:
                return r
        raise StateError(f"no stage {stage_id!r} in state")

    def running(self) -> list[StageRecord]:
        return [r for r in self.stages if r.status is StageStatus.RUNNING]

    def all_done(self) -> bool:
        return bool(self.stages) and all(r.status is StageStatus.DONE for r in self.stages)

    def reset(self, team: str, stage_ids: Sequence[str], keep: Sequence[StageRecord] = ()) -> None:
        """Start a new plan, logging it so replay can find where it began."""
        kept = {r.id: r for r in keep}
        self.team = team
        self.stages = [kept.get(i, StageRecord(i)) for i in stage_ids]
        self.log.append(
            {
                "event": "plan",
                "team": team,
                "stages": list(stage_ids),
                "kept": {r.id: r.status.value for r in self.stages if r.id in kept},
            }
        )

    def transition(self, stage_id: str, to: StageStatus, at: str, *, diagnostic: str | None = None) -> StageRecord:
        rec = self.record(stage_id)
        to = StageStatus(to)
        if to not in ALLOWED[rec.status]:
            raise StateError(f"illegal transition for {stage_id}: {rec.status.value} -> {to.value}")
        if to is StageStatus.RUNNING and self.running():
            raise StateError(f"cannot start {stage_id}: {self.running()[0].id} is running")
        self.log.append({"event": "transition", "stage": stage_id, "from": rec.status.value, "to": to.value, "at": at})
        rec.status = to
        if to is StageStatus.RUNNING:
            rec.started_at, rec.finished_at, rec.diagnostic = at, None, None
        elif to in (StageStatus.DONE, StageStatus.FAILED):
            rec.finished_at = at
            rec.diagnostic = diagnostic
        return rec

    def to_dict(self) -> dict:
        return {
            "version": STATE_VERSION,
            "team": self.team,
            "resume_token": self.resume_token,
            "stages": [r.to_dict() for r in self.stages],
            "log": list(self.log),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineState":
        if data.get("version") != STATE_VERSION:
            raise StateError(f"unsupported state version: {data.get('version')!r}")
        try:
            stages = [
                StageRecord(
                    s["id"],
                    StageStatus(s["status"]),
                    s.get("started_at"),
                    s.get("finished_at"),
                    list(s.get("outputs", [])),
                    s.get("diagnostic"),
                )
                for s in data.get("stages", [])
            ]
        except (KeyError, ValueError, TypeError) as exc:
            raise StateError(f"malformed stage record: {exc}") from None
        log = list(data.get("log", []))
        state = cls(data.get("team"), stages, log)
        token = data.get("resume_token", 0)
        if token != len(log):
            raise StateError(f"resume_token {token} does not match log length {len(log)}")
        if len(state.running()) > 1:
            raise StateError("state has more than one running stage")
        state.persisted_token = token
        return state


def replay_log(log: Sequence[dict]) -> dict[str, StageStatus]:
    """Stage statuses reconstructed from the transition log alone."""
    statuses: dict[str, StageStatus] = {}
    for entry in log:
        if entry.get("event") == "plan":
            kept = entry.get("kept", {})
            statuses = {sid: StageStatus(kept.get(sid, "pending")) for sid in entry["stages"]}
        elif entry.get("event") == "transition":
            sid = entry["stage"]
            if statuses.get(sid) is not StageStatus(entry["from"]):
                raise StateError(f"log replay: {sid} expected {entry['from']}, found {statuses.get(sid)}")
            statuses[sid] = StageStatus(entry["to"])
    return statuses


def load_state(root: Path) -> PipelineState:
    path = Path(root) / STATE_PATH
    if not path.is_file():
        return PipelineState()
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise StateError(f"{STATE_PATH}: {exc}") from None
    return PipelineState.from_dict(data)


def save_state(root: Path, state: PipelineState) -> None:
    """Atomically persist ``state``, refusing if another runner moved it on."""
    path = Path(root) / STATE_PATH
    if path.is_file() and state.persisted_token is not None:
        try:
            on_disk = json.loads(path.read_text(encoding="utf-8")).get("resume_token", 0)
        except ValueError:
            on_disk = None
        if on_disk != state.persisted_token:
            raise StateError(
                f"state changed by another runner (resume_token {on_disk}, expected {state.persisted_token})"
            )
    atomic_write(path, canonical_json(state.to_dict()))
    state.persisted_token = state.resume_token
