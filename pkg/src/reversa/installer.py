"""Engine detection and the install/update/status/uninstall flows.

Everything the tool installs is tracked in the SHA-256 manifest so that update
and uninstall can tell pristine files from ones the user has edited.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import __version__
from ._fs import LOCK_PATH, STATE_DIR, PathEscapeError, ProjectLock, atomic_write, canonical_json, check_relpath
from .artifacts import render_template
from .config import DEFAULT_OUTPUT_ROOT, USER_CONFIG_PATH, USER_CONFIG_TEMPLATE, load_config, render_default_config
from .manifest import (
    MANIFEST_PATH,
    Action,
    ActionPlan,
    ApplyReport,
    FileClass,
    Verb,
    apply_plan,
    classify_files,
    find_untracked,
    load_manifest,
    plan_uninstall,
    plan_update,
)
from .teams import ORCHESTRATOR, UnknownTeamError, get_team

META_PATH = f"{STATE_DIR}/install-meta.json"
STATE_PATH = f"{STATE_DIR}/state.json"
PLAN_PATH = f"{STATE_DIR}/plan.md"
VERSION_PATH = f"{STATE_DIR}/VERSION"
CONFIG_PATH = f"{STATE_DIR}/config.toml"
EXECUTOR_SCRIPT = f"{STATE_DIR}/scripts/external-executor.sh"
CONTROL_FILES = (MANIFEST_PATH, META_PATH, LOCK_PATH)

# tracked, but update never rewrites them: the user's overrides and the
# files the pipeline itself keeps current
USER_OWNED = (USER_CONFIG_PATH, STATE_PATH, PLAN_PATH)


class InstallError(RuntimeError):
    pass


class InstallValidationError(InstallError):
    """Bad selection or configuration, detected before anything is written."""


@dataclass(frozen=True)
class EngineDescriptor:
    id: str
    display_name: str
    marker: str
    skills_dir: str
    entry_file: str

    def __post_init__(self) -> None:
        for name in ("marker", "skills_dir", "entry_file"):
            value = getattr(self, name)
            try:
                check_relpath(value)
            except PathEscapeError as exc:
                raise InstallValidationError(f"engine {self.id}: {name} {exc}") from None


DEFAULT_ENGINES: tuple[EngineDescriptor, ...] = (
    EngineDescriptor("claude-code", "Claude Code", ".claude", ".claude/skills", "CLAUDE.md"),
    EngineDescriptor("codex", "Codex", ".codex", ".codex/skills", "AGENTS.md"),
    EngineDescriptor("cursor", "Cursor", ".cursor", ".cursor/skills", ".cursor/rules/reversa.mdc"),
    EngineDescriptor("gemini-cli", "Gemini CLI", ".gemini", ".gemini/skills", "GEMINI.md"),
    EngineDescriptor("windsurf", "Windsurf", ".windsurf", ".windsurf/skills", ".windsurf/rules/reversa.md"),
    EngineDescriptor("antigravity", "Antigravity", ".agent", ".agent/skills", "AGENTS.md"),
    EngineDescriptor("kiro", "Kiro", ".kiro", ".kiro/skills", ".kiro/steering/reversa.md"),
    EngineDescriptor("opencode", "opencode", ".opencode", ".opencode/skills", "AGENTS.md"),
    EngineDescriptor("cline", "Cline", ".clinerules", ".cline/skills", ".clinerules/reversa.md"),
    EngineDescriptor("roo-code", "Roo Code", ".roo", ".roo/skills", ".roo/rules/reversa.md"),
    EngineDescriptor(
        "github-copilot",
        "GitHub Copilot",
        ".github/copilot-instructions.md",
        ".github/skills",
        ".github/instructions/reversa.instructions.md",
    ),
    EngineDescriptor("aider", "Aider", ".aider.conf.yml", ".aider/skills", "CONVENTIONS.md"),
    EngineDescriptor("amazon-q", "Amazon Q Developer", ".amazonq", ".amazonq/skills", ".amazonq/rules/reversa.md"),
)


def engine_table(overrides: Mapping[str, Mapping] | None = None) -> list[EngineDescriptor]:
    """The default table with ``[engines.<id>]`` config tables applied on top.

    An override may replace any field of a known engine or define a new one;
    a new engine without an ``entry_file`` gets ``AGENTS.md``.
    """
    table = {e.id: e for e in DEFAULT_ENGINES}
    for eid, fields in (overrides or {}).items():
        base = table.get(eid)
        if base is None:
            if "marker" not in fields or "skills_dir" not in fields:
                raise InstallValidationError(f"engine {eid}: marker and skills_dir are required")
            base = EngineDescriptor(eid, eid, fields["marker"], fields["skills_dir"], "AGENTS.md")
        table[eid] = EngineDescriptor(
            eid,
            str(fields.get("display_name", base.display_name)),
            str(fields.get("marker", base.marker)),
            str(fields.get("skills_dir", base.skills_dir)),
            str(fields.get("entry_file", base.entry_file)),
        )
    return list(table.values())


def detect_engines(root: Path, table: Iterable[EngineDescriptor] = DEFAULT_ENGINES) -> list[EngineDescriptor]:
    """Engines whose marker path exists under ``root``, in table order."""
    root = Path(root)
    found = []
    for engine in table:
        try:
            present = (root / engine.marker).exists()
        except OSError:
            present = False
        if present:
            found.append(engine)
    return found


@dataclass
class InstallConfig:
    engines: list[str]
    teams: list[str] = field(default_factory=lambda: ["discovery"])
    project_name: str = ""
    analyzed_version: str = ""
    output_root: str = DEFAULT_OUTPUT_ROOT

    def validate(self, table: Iterable[EngineDescriptor] = DEFAULT_ENGINES) -> None:
        if not self.engines:
            raise InstallValidationError("select at least one engine")
        if not self.teams:
            raise InstallValidationError("select at least one team")
        known = [e.id for e in table]
        for eid in self.engines:
            if eid not in known:
                raise InstallValidationError(f"unknown engine {eid!r}; known engines: {', '.join(known)}")
        for tid in self.teams:
            try:
                get_team(tid)
            except UnknownTeamError as exc:
                raise InstallValidationError(str(exc)) from None
        try:
            check_relpath(self.output_root.rstrip("/"))
        except PathEscapeError:
            raise InstallValidationError(f"output root must be a relative path: {self.output_root!r}") from None


# --- payload -----------------------------------------------------------------


def skill_text(role: str) -> bytes:
    return resources.files("reversa").joinpath("payload", "skills", f"{role}.md").read_bytes()


def skill_path(engine: EngineDescriptor, role: str) -> str:
    name = ORCHESTRATOR if role == ORCHESTRATOR else f"reversa-{role}"
    return f"{engine.skills_dir}/{name}/SKILL.md"


def entry_text(entry_file: str) -> bytes:
    """Entry document for an engine. Depends only on the file name, so engines
    sharing an entry file (several read ``AGENTS.md``) install identical bytes."""
    body = (
        "# Reversa\n\n"
        "This project has the Reversa agent skills installed.\n\n"
        "- Start with the `reversa` skill; it reads `.reversa/state.json` and resumes the next pending stage.\n"
        "- Each specialist skill writes only the artifacts listed for its stage.\n"
        "- Label every claim CONFIRMED, INFERRED or GAP and cite `path#Lstart-Lend` evidence for confirmed ones.\n"
        "- Never edit the legacy source tree.\n"
    )
    if entry_file.endswith(".mdc"):
        body = "---\ndescription: Reversa reverse-documentation workflow\nalwaysApply: true\n---\n\n" + body
    return body.encode("utf-8")


def engine_files(engine: EngineDescriptor, teams: Iterable[str]) -> dict[str, bytes]:
    roles = [ORCHESTRATOR] + [a for t in teams for a in get_team(t).agents]
    files = {skill_path(engine, r): skill_text(r) for r in roles}
    files[engine.entry_file] = entry_text(engine.entry_file)
    return files


def _plan_doc(teams: Iterable[str]) -> str:
    lines = ["# Plan", "", "Installed teams and the order their agents run in.", ""]
    for tid in teams:
        lines.append(f"## {tid}")
        lines.extend(f"{i}. {a}" for i, a in enumerate(get_team(tid).agents, 1))
        lines.append("")
    return "\n".join(lines)


_EXECUTOR_SAMPLE = """#!/bin/sh
# Sample external executor. Invoked as: external-executor.sh <bundle.json>
# Environment: REVERSA_BUNDLE (same path), REVERSA_OUTPUT_DIR (write artifacts here).
# Exit 0 on success; anything else marks the stage failed.
set -eu
bundle="$1"
out="$REVERSA_OUTPUT_DIR"
echo "bundle: $bundle -> $out" >&2
exit 1
"""


def state_files(cfg: InstallConfig) -> dict[str, bytes]:
    kinds = sorted({k for t in cfg.teams for k in get_team(t).templates}, key=lambda k: k.value)
    files = {
        STATE_PATH: canonical_json({"version": 1, "team": None, "resume_token": 0, "stages": []}),
        CONFIG_PATH: render_default_config(cfg.output_root.strip("/"), cfg.project_name, cfg.analyzed_version).encode(),
        USER_CONFIG_PATH: USER_CONFIG_TEMPLATE.encode(),
        PLAN_PATH: _plan_doc(cfg.teams).encode(),
        VERSION_PATH: f"{__version__}\n".encode(),
        EXECUTOR_SCRIPT: _EXECUTOR_SAMPLE.encode(),
    }
    for kind in kinds:
        files[f"{STATE_DIR}/templates/{kind.value}.md"] = render_template(kind).encode()
    return files


def build_payload(cfg: InstallConfig, table: Iterable[EngineDescriptor] = DEFAULT_ENGINES) -> dict[str, bytes]:
    by_id = {e.id: e for e in table}
    payload = state_files(cfg)
    for eid in cfg.engines:
        payload.update(engine_files(by_id[eid], cfg.teams))
    return dict(sorted(payload.items()))


# --- reports -----------------------------------------------------------------


@dataclass
class InstallReport:
    command: str
    ok: bool
    dry_run: bool
    outcomes: list[tuple[str, str, str]] = field(default_factory=list)
    error: str | None = None

    @property
    def written(self) -> list[str]:
        want = "planned" if self.dry_run else "done"
        return [p for p, v, o in self.outcomes if v in ("create", "replace") and o == want]

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "ok": self.ok,
            "dry_run": self.dry_run,
            "error": self.error,
            "written": self.written,
            "outcomes": [{"path": p, "verb": v, "outcome": o} for p, v, o in self.outcomes],
        }


@dataclass
class StatusReport:
    classes: dict[str, FileClass]
    untracked: list[str]
    version: str
    engines: list[str]
    teams: list[str]

    @property
    def counts(self) -> dict[str, int]:
        out = {c.value: 0 for c in FileClass}
        for c in self.classes.values():
            out[c.value] += 1
        out["untracked"] = len(self.untracked)
        return out

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "engines": self.engines,
            "teams": self.teams,
            "counts": self.counts,
            "files": {p: c.value for p, c in sorted(self.classes.items())},
            "untracked": self.untracked,
        }


# --- flows -------------------------------------------------------------------


def _read_meta(root: Path) -> dict:
    path = root / META_PATH
    if not path.is_file():
        raise InstallError("not installed: run `reversa install` first")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise InstallError(f"{META_PATH}: {exc}") from None


def _write_meta(root: Path, meta: dict) -> None:
    atomic_write(root / META_PATH, canonical_json(meta))


def _require_manifest(root: Path):
    if not (root / MANIFEST_PATH).is_file():
        raise InstallError("not installed: run `reversa install` first")
    return load_manifest(root)


def _new_dirs(root: Path, paths: Iterable[str]) -> list[str]:
    """Ancestor directories of ``paths`` that do not exist yet."""
    out = set()
    for p in list(paths) + [MANIFEST_PATH, META_PATH]:
        parts = p.split("/")[:-1]
        for i in range(1, len(parts) + 1):
            d = "/".join(parts[:i])
            if not (root / d).exists():
                out.add(d)
    return sorted(out)


def _prune(root: Path, dirs: Iterable[str]) -> None:
    for d in sorted(set(dirs), key=lambda d: (-d.count("/"), d)):
        try:
            (root / d).rmdir()
        except OSError:
            pass


def _occupied(root: Path, paths: Iterable[str]) -> set[str]:
    return {p for p in paths if (root / p).exists() or (root / p).is_symlink()}


def _report(command: str, result: ApplyReport) -> InstallReport:
    return InstallReport(command, result.ok, result.dry_run, result.outcomes, result.error)


def _apply_new(
    root: Path,
    command: str,
    payload: Mapping[str, bytes],
    meta: dict,
    *,
    dry_run: bool,
    break_lock: bool,
    manifest=None,
) -> InstallReport:
    """Create every payload path not yet tracked; shared by install/add flows."""
    tracked = set(manifest.entries) if manifest else set()
    fresh = {p: c for p, c in payload.items() if p not in tracked}
    occupied = _occupied(root, fresh)
    actions = [
        Action(p, Verb.SKIP, "untracked file already at path") if p in occupied else Action(p, Verb.CREATE, "new", c)
        for p, c in sorted(fresh.items())
    ]
    plan = ActionPlan(actions, dry_run=dry_run, kind="install")
    if dry_run:
        return _report(command, apply_plan(plan, root, manifest))
    created = _new_dirs(root, fresh)
    with ProjectLock(root, break_stale=break_lock) as lock:
        result = apply_plan(plan, root, manifest)
        if not result.ok:
            _prune(root, [d for d in created if d != STATE_DIR])
            lock.prune_state_dir = STATE_DIR in created
            return _report(command, result)
        # skipped paths stay the user's, so they never enter the manifest
        meta["created_dirs"] = sorted(set(meta.get("created_dirs", [])) | set(created))
        meta["version"] = __version__
        _write_meta(root, meta)
    return _report(command, result)


def install(
    cfg: InstallConfig,
    root: Path,
    *,
    table: Iterable[EngineDescriptor] | None = None,
    dry_run: bool = False,
    break_lock: bool = False,
) -> InstallReport:
    root = Path(root)
    table = list(table) if table is not None else list(DEFAULT_ENGINES)
    cfg.validate(table)
    if (root / MANIFEST_PATH).exists() or (root / META_PATH).exists():
        raise InstallError("already installed: use `reversa update`")
    payload = build_payload(cfg, table)
    meta = {
        "project": {"name": cfg.project_name, "analyzed_version": cfg.analyzed_version},
        "engines": list(cfg.engines),
        "teams": list(cfg.teams),
        "output_root": cfg.output_root.strip("/"),
        "user_owned": list(USER_OWNED),
        "created_dirs": [],
        "version": __version__,
    }
    overrides = {e.id: e for e in table if e not in DEFAULT_ENGINES and e.id in cfg.engines}
    if overrides:
        meta["engine_table"] = {
            e.id: {"display_name": e.display_name, "marker": e.marker, "skills_dir": e.skills_dir, "entry_file": e.entry_file}
            for e in overrides.values()
        }
    return _apply_new(root, "install", payload, meta, dry_run=dry_run, break_lock=break_lock)


def _meta_table(root: Path, meta: dict) -> list[EngineDescriptor]:
    overrides = dict(meta.get("engine_table", {}))
    overrides.update(load_config(root).raw.get("engines", {}))
    return engine_table(overrides)


def _meta_config(meta: dict) -> InstallConfig:
    project = meta.get("project", {})
    return InstallConfig(
        engines=list(meta.get("engines", [])),
        teams=list(meta.get("teams", [])),
        project_name=project.get("name", ""),
        analyzed_version=project.get("analyzed_version", ""),
        output_root=meta.get("output_root", DEFAULT_OUTPUT_ROOT),
    )


def add_engine(root: Path, engine_id: str, *, dry_run: bool = False, break_lock: bool = False) -> InstallReport:
    root = Path(root)
    manifest = _require_manifest(root)
    meta = _read_meta(root)
    table = _meta_table(root, meta)
    by_id = {e.id: e for e in table}
    if engine_id not in by_id:
        raise InstallValidationError(f"unknown engine {engine_id!r}; known engines: {', '.join(by_id)}")
    if engine_id in meta.get("engines", []):
        return InstallReport("add-engine", True, dry_run)
    payload = engine_files(by_id[engine_id], meta.get("teams", []))
    meta["engines"] = list(meta.get("engines", [])) + [engine_id]
    return _apply_new(root, "add-engine", payload, meta, dry_run=dry_run, break_lock=break_lock, manifest=manifest)


def add_agent(root: Path, team_id: str, *, dry_run: bool = False, break_lock: bool = False) -> InstallReport:
    root = Path(root)
    manifest = _require_manifest(root)
    meta = _read_meta(root)
    try:
        get_team(team_id)
    except UnknownTeamError as exc:
        raise InstallValidationError(str(exc)) from None
    if team_id in meta.get("teams", []):
        return InstallReport("add-agent", True, dry_run)
    meta["teams"] = list(meta.get("teams", [])) + [team_id]
    cfg = _meta_config(meta)
    payload = build_payload(cfg, _meta_table(root, meta))
    # the plan document lists teams; it is refreshed through `update`
    payload.pop(PLAN_PATH, None)
    return _apply_new(root, "add-agent", payload, meta, dry_run=dry_run, break_lock=break_lock, manifest=manifest)


def _major(version: str) -> str:
    return version.split(".", 1)[0]


def update(root: Path, *, dry_run: bool = False, force: bool = False, break_lock: bool = False) -> InstallReport:
    """Rewrite intact and missing files from the current payload; preserve the rest."""
    root = Path(root)
    manifest = _require_manifest(root)
    meta = _read_meta(root)
    version_file = root / VERSION_PATH
    installed = version_file.read_text(encoding="utf-8").strip() if version_file.is_file() else meta.get("version", "0")
    if _major(installed) != _major(__version__) and not force:
        raise InstallError(
            f"installed version {installed} and tool version {__version__} differ in major version; pass --force"
        )
    payload = build_payload(_meta_config(meta), _meta_table(root, meta))
    classification = classify_files(manifest, root)
    occupied = _occupied(root, set(payload) - set(manifest.entries))
    plan = plan_update(
        classification,
        payload,
        user_owned=meta.get("user_owned", USER_OWNED),
        occupied=occupied,
        dry_run=dry_run,
    )
    if dry_run:
        return _report("update", apply_plan(plan, root, manifest))
    created = _new_dirs(root, [a.path for a in plan.actions if a.verb is Verb.CREATE])
    with ProjectLock(root, break_stale=break_lock):
        result = apply_plan(plan, root, manifest)
        if not result.ok:
            _prune(root, created)
            return _report("update", result)
        meta["created_dirs"] = sorted(set(meta.get("created_dirs", [])) | set(created))
        meta["version"] = __version__
        _write_meta(root, meta)
    return _report("update", result)


def uninstall(root: Path, *, dry_run: bool = False, break_lock: bool = False) -> InstallReport:
    """Delete intact tracked files; keep modified and untracked ones."""
    root = Path(root)
    manifest = _require_manifest(root)
    meta = _read_meta(root)
    classification = classify_files(manifest, root)
    untracked = find_untracked(manifest, root, ignore=CONTROL_FILES)
    created = [d for d in meta.get("created_dirs", []) if d != STATE_DIR]
    plan = plan_uninstall(classification, untracked=untracked, created_dirs=created, dry_run=dry_run)
    if dry_run:
        return _report("uninstall", apply_plan(plan, root, manifest))
    with ProjectLock(root, break_stale=break_lock) as lock:
        result = apply_plan(plan, root, manifest)
        if not result.ok:
            return _report("uninstall", result)
        (root / META_PATH).unlink(missing_ok=True)
        _prune(root, created)
        lock.prune_state_dir = STATE_DIR in meta.get("created_dirs", [])
    return _report("uninstall", result)


def status(root: Path) -> StatusReport:
    root = Path(root)
    manifest = _require_manifest(root)
    meta = _read_meta(root)
    return StatusReport(
        classes=classify_files(manifest, root),
        untracked=find_untracked(manifest, root, ignore=CONTROL_FILES),
        version=meta.get("version", "unknown"),
        engines=list(meta.get("engines", [])),
        teams=list(meta.get("teams", [])),
    )
