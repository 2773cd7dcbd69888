"""SHA-256 file manifest and the classify/update/uninstall preservation protocol.

The manifest records every file the tool installed. Before any update or
uninstall the on-disk files are classified against it:

* ``intact``   - present and byte-identical to what was installed
* ``modified`` - present but changed by the user
* ``missing``  - removed by the user

Only intact/missing files are ever rewritten; modified and untracked files are
preserved. Hashes cover raw bytes, so a line-ending conversion counts as a
modification.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import re
from collections.abc import Collection, Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ._fs import STATE_DIR, PathEscapeError, atomic_write, canonical_json, check_relpath, iter_files, resolve_under

logger = logging.getLogger(__name__)

MANIFEST_PATH = f"{STATE_DIR}/_config/files-manifest.json"
MANIFEST_VERSION = 1

_HEX64 = re.compile(r"[0-9a-f]{64}")
_PARALLEL_THRESHOLD = 16


class ManifestError(ValueError):
    pass


class FileClass(str, enum.Enum):
    INTACT = "intact"
    MODIFIED = "modified"
    MISSING = "missing"


class Verb(str, enum.Enum):
    REPLACE = "replace"
    PRESERVE = "preserve"
    CREATE = "create"
    DELETE = "delete"
    SKIP = "skip"


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    sha256: str
    bytes: int

    def __post_init__(self) -> None:
        try:
            check_relpath(self.path)
        except PathEscapeError as exc:
            raise ManifestError(str(exc)) from None
        if not isinstance(self.sha256, str) or not _HEX64.fullmatch(self.sha256):
            raise ManifestError(f"invalid sha256 for {self.path!r}: {self.sha256!r}")
        if not isinstance(self.bytes, int) or isinstance(self.bytes, bool) or self.bytes < 0:
            raise ManifestError(f"invalid byte count for {self.path!r}: {self.bytes!r}")


@dataclass
class Manifest:
    entries: dict[str, ManifestEntry] = field(default_factory=dict)
    version: int = MANIFEST_VERSION
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_entries(cls, entries: Iterable[ManifestEntry], **kwargs) -> "Manifest":
        table: dict[str, ManifestEntry] = {}
        for entry in entries:
            if entry.path in table:
                raise ManifestError(f"duplicate path: {entry.path}")
            table[entry.path] = entry
        return cls(entries=dict(sorted(table.items())), **kwargs)

    def sorted_entries(self) -> list[ManifestEntry]:
        return [self.entries[p] for p in sorted(self.entries)]

    def __contains__(self, path: object) -> bool:
        return path in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def compute_digest(content: bytes) -> str:
    return hashlib.sha256(content).hexdigest()


def _digest_file(path: Path) -> tuple[str, int]:
    h = hashlib.sha256()
    size = 0
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
            size += len(chunk)
    return h.hexdigest(), size


def _map(fn, items: list):
    # Results come back in input order, so scheduling never affects output.
    if len(items) < _PARALLEL_THRESHOLD:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=min(8, os.cpu_count() or 1)) as pool:
        return list(pool.map(fn, items))


def build_manifest(root: Path, files: Iterable[str]) -> Manifest:
    """Hash ``files`` (relative to ``root``) into a new manifest."""
    root = Path(root)
    files = list(files)
    seen: set[str] = set()
    for rel in files:
        if rel in seen:
            raise ManifestError(f"duplicate path: {rel}")
        seen.add(rel)

    def entry(rel: str) -> ManifestEntry:
        try:
            full = resolve_under(root, rel)
        except PathEscapeError as exc:
            raise ManifestError(str(exc)) from None
        try:
            digest, size = _digest_file(full)
        except OSError as exc:
            raise ManifestError(f"cannot read {rel}: {exc.strerror or exc}") from None
        return ManifestEntry(rel, digest, size)

    return Manifest.from_entries(_map(entry, files))


def serialize_manifest(manifest: Manifest) -> bytes:
    doc = dict(manifest.extra)
    doc["version"] = manifest.version
    doc["files"] = {e.path: {"bytes": e.bytes, "sha256": e.sha256} for e in manifest.sorted_entries()}
    return canonical_json(doc)


def parse_manifest(data: bytes | str) -> Manifest:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ManifestError(f"manifest is not UTF-8: {exc}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ManifestError("manifest root must be an object")
    version = doc.get("version")
    if version != MANIFEST_VERSION:
        raise ManifestError(f"unsupported manifest version: {version!r}")
    files = doc.get("files")
    if not isinstance(files, dict):
        raise ManifestError("field 'files' must be an object")
    entries = []
    for path, info in files.items():
        if not isinstance(info, dict):
            raise ManifestError(f"files.{path}: entry must be an object")
        sha = info.get("sha256")
        if not isinstance(sha, str) or not _HEX64.fullmatch(sha):
            raise ManifestError(f"files.{path}.sha256: invalid sha256 {sha!r}")
        entries.append(ManifestEntry(path, sha, info.get("bytes")))
    extra = {k: v for k, v in doc.items() if k not in ("version", "files")}
    return Manifest.from_entries(entries, extra=extra)


def load_manifest(root: Path) -> Manifest:
    path = Path(root) / MANIFEST_PATH
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise ManifestError(f"no manifest at {MANIFEST_PATH}") from None
    return parse_manifest(data)


def refresh_entries(root: Path, paths: Iterable[str]) -> bool:
    """Re-record digests of tool-rewritten files that the manifest already owns.

    Used for runtime files the tool regenerates (pipeline state, plan mirror)
    so that they keep classifying as intact. Returns whether anything changed.
    """
    root = Path(root)
    if not (root / MANIFEST_PATH).is_file():
        return False
    manifest = load_manifest(root)
    entries = dict(manifest.entries)
    for rel in paths:
        full = root / rel
        if rel in entries and full.is_file():
            data = full.read_bytes()
            entries[rel] = ManifestEntry(rel, compute_digest(data), len(data))
    if entries == manifest.entries:
        return False
    atomic_write(root / MANIFEST_PATH, serialize_manifest(Manifest.from_entries(entries.values(), extra=manifest.extra)))
    return True


def classify_files(manifest: Manifest, root: Path) -> dict[str, FileClass]:
    """Classify every manifest entry against the files under ``root``."""
    root = Path(root)

    def classify(entry: ManifestEntry) -> FileClass:
        try:
            full = resolve_under(root, entry.path)
        except PathEscapeError:
            return FileClass.MODIFIED
        if not full.exists() and not full.is_symlink():
            return FileClass.MISSING
        if full.is_symlink() or not full.is_file():
            # something else now sits at an installed path; never ours to touch
            return FileClass.MODIFIED
        try:
            digest, _ = _digest_file(full)
        except OSError as exc:
            raise ManifestError(f"cannot read {entry.path}: {exc.strerror or exc}") from None
        return FileClass.INTACT if digest == entry.sha256 else FileClass.MODIFIED

    entries = manifest.sorted_entries()
    return dict(zip((e.path for e in entries), _map(classify, entries)))


def owned_dirs(manifest: Manifest) -> list[str]:
    dirs = {e.path.rsplit("/", 1)[0] for e in manifest.entries.values() if "/" in e.path}
    return sorted(dirs)


def find_untracked(manifest: Manifest, root: Path, ignore: Collection[str] = ()) -> list[str]:
    """Files under directories the tool installed into that the manifest does not own."""
    root = Path(root)
    found: set[str] = set()
    for d in owned_dirs(manifest):
        for rel in iter_files(root, root / d):
            if rel not in manifest and rel not in ignore:
                found.add(rel)
    return sorted(found)


@dataclass(frozen=True)
class Action:
    path: str
    verb: Verb
    reason: str
    content: bytes | None = field(default=None, repr=False, compare=False)


@dataclass
class ActionPlan:
    actions: list[Action]
    dry_run: bool = False
    kind: str = "update"
    remove_dirs: list[str] = field(default_factory=list)

    def by_verb(self, verb: Verb) -> list[str]:
        return [a.path for a in self.actions if a.verb == verb]

    def verbs(self) -> dict[str, str]:
        return {a.path: a.verb.value for a in self.actions}

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dry_run": self.dry_run,
            "actions": [{"path": a.path, "verb": a.verb.value, "reason": a.reason} for a in self.actions],
            "remove_dirs": list(self.remove_dirs),
        }


def plan_update(
    classification: Mapping[str, FileClass],
    new_payload: Mapping[str, bytes],
    *,
    user_owned: Collection[str] = (),
    occupied: Collection[str] = (),
    dry_run: bool = False,
) -> ActionPlan:
    """Decide, per path, what an update does. Pure; nothing is written.

    ``user_owned`` paths are tracked but never rewritten by an update.
    ``occupied`` lists payload paths that are not in the manifest yet already
    exist on disk; those belong to the user and are skipped.
    """
    actions: list[Action] = []
    for path in sorted(set(classification) | set(new_payload)):
        cls = classification.get(path)
        content = new_payload.get(path)
        if cls is None:
            if path in occupied:
                actions.append(Action(path, Verb.SKIP, "untracked file already at path"))
            else:
                actions.append(Action(path, Verb.CREATE, "new in payload", content))
        elif cls is FileClass.MODIFIED:
            reason = "modified by user" if content is not None else "orphaned-modified: removed from payload"
            actions.append(Action(path, Verb.PRESERVE, reason))
        elif path in user_owned:
            if cls is FileClass.MISSING and content is not None:
                actions.append(Action(path, Verb.CREATE, "user-owned file missing", content))
            else:
                actions.append(Action(path, Verb.SKIP, "user-owned"))
        elif content is None:
            if cls is FileClass.INTACT:
                actions.append(Action(path, Verb.DELETE, "removed from payload"))
            else:
                actions.append(Action(path, Verb.SKIP, "missing and removed from payload"))
        elif cls is FileClass.INTACT:
            actions.append(Action(path, Verb.REPLACE, "intact", content))
        else:
            actions.append(Action(path, Verb.CREATE, "missing", content))
    return ActionPlan(actions, dry_run=dry_run, kind="update")


def plan_uninstall(
    classification: Mapping[str, FileClass],
    *,
    untracked: Iterable[str] = (),
    created_dirs: Iterable[str] = (),
    dry_run: bool = False,
) -> ActionPlan:
    actions: list[Action] = []
    rules = {
        FileClass.INTACT: (Verb.DELETE, "intact"),
        FileClass.MODIFIED: (Verb.PRESERVE, "modified by user"),
        FileClass.MISSING: (Verb.SKIP, "already missing"),
    }
    for path in sorted(classification):
        verb, reason = rules[classification[path]]
        actions.append(Action(path, verb, reason))
    for path in sorted(set(untracked) - set(classification)):
        actions.append(Action(path, Verb.PRESERVE, "untracked"))
    # deepest first; only removed at apply time if actually empty
    dirs = sorted(set(created_dirs), key=lambda d: (-d.count("/"), d))
    return ActionPlan(actions, dry_run=dry_run, kind="uninstall", remove_dirs=dirs)


@dataclass
class ApplyReport:
    ok: bool
    dry_run: bool
    outcomes: list[tuple[str, str, str]]
    error: str | None = None
    manifest: Manifest | None = None
    removed_dirs: list[str] = field(default_factory=list)

    def paths_with(self, verb: str, outcome: str = "done") -> list[str]:
        return [p for p, v, o in self.outcomes if v == verb and o == outcome]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "dry_run": self.dry_run,
            "error": self.error,
            "outcomes": [{"path": p, "verb": v, "outcome": o} for p, v, o in self.outcomes],
            "removed_dirs": list(self.removed_dirs),
        }


def _write(path: Path, data: bytes) -> None:
    atomic_write(path, data)


def _remove(path: Path) -> None:
    path.unlink()


def apply_plan(
    plan: ActionPlan,
    root: Path,
    manifest: Manifest | None = None,
    *,
    write_manifest: bool = True,
) -> ApplyReport:
    """Execute ``plan`` under ``root``.

    On any failure the remaining actions are abandoned, completed actions are
    rolled back from in-memory backups, and the manifest on disk is left as it
    was. The manifest is rewritten (or, for an uninstall, removed) only once
    every action has succeeded.
    """
    root = Path(root)
    targets: dict[str, Path] = {}
    for action in plan.actions:
        try:
            targets[action.path] = resolve_under(root, action.path)
        except PathEscapeError as exc:
            raise ManifestError(f"plan rejected: {exc}") from None
        if action.verb in (Verb.REPLACE, Verb.CREATE) and action.content is None:
            raise ManifestError(f"plan rejected: no content for {action.verb.value} {action.path}")
    for d in plan.remove_dirs:
        try:
            check_relpath(d)
        except PathEscapeError as exc:
            raise ManifestError(f"plan rejected: {exc}") from None

    if plan.dry_run:
        outcomes = [(a.path, a.verb.value, "planned") for a in plan.actions]
        return ApplyReport(True, True, outcomes)

    outcomes: list[tuple[str, str, str]] = []
    undo: list[tuple[Path, bytes | None]] = []
    error = None
    for action in plan.actions:
        target = targets[action.path]
        if action.verb in (Verb.PRESERVE, Verb.SKIP):
            outcomes.append((action.path, action.verb.value, "done"))
            continue
        try:
            before = target.read_bytes() if target.is_file() else None
            if action.verb is Verb.DELETE:
                _remove(target)
            else:
                _write(target, action.content)
            undo.append((target, before))
            outcomes.append((action.path, action.verb.value, "done"))
        except OSError as exc:
            error = f"{action.verb.value} {action.path}: {exc.strerror or exc}"
            outcomes.append((action.path, action.verb.value, "failed"))
            break

    if error is not None:
        logger.warning("apply failed, rolling back: %s", error)
        for target, before in reversed(undo):
            try:
                if before is None:
                    target.unlink(missing_ok=True)
                else:
                    atomic_write(target, before)
            except OSError:  # pragma: no cover - best effort
                logger.error("rollback failed for %s", target)
        done = {o[0] for o in outcomes}
        outcomes = [(p, v, "rolled-back" if o == "done" and v not in ("preserve", "skip") else o) for p, v, o in outcomes]
        outcomes += [(a.path, a.verb.value, "not-run") for a in plan.actions if a.path not in done]
        return ApplyReport(False, False, outcomes, error=error)

    new_manifest = _next_manifest(plan, root, manifest)
    manifest_file = root / MANIFEST_PATH
    if write_manifest:
        if plan.kind == "uninstall":
            manifest_file.unlink(missing_ok=True)
        else:
            atomic_write(manifest_file, serialize_manifest(new_manifest))

    removed = []
    for d in plan.remove_dirs:
        try:
            (root / d).rmdir()
            removed.append(d)
        except OSError:
            pass
    return ApplyReport(True, False, outcomes, manifest=new_manifest, removed_dirs=removed)


def _next_manifest(plan: ActionPlan, root: Path, old: Manifest | None) -> Manifest:
    old_entries = dict(old.entries) if old else {}
    extra = dict(old.extra) if old else {}
    entries: dict[str, ManifestEntry] = {}
    if plan.kind == "uninstall":
        return Manifest(extra=extra)
    for action in plan.actions:
        if action.verb in (Verb.REPLACE, Verb.CREATE):
            entries[action.path] = ManifestEntry(action.path, compute_digest(action.content), len(action.content))
        elif action.verb in (Verb.PRESERVE, Verb.SKIP):
            prior = old_entries.get(action.path)
            if prior is not None and (root / action.path).exists():
                entries[action.path] = prior
    planned = {a.path for a in plan.actions}
    for path, prior in old_entries.items():
        if path not in planned:
            entries[path] = prior
    return Manifest.from_entries(entries.values(), extra=extra)
