"""Filesystem plumbing shared by the mutating modules."""

from __future__ import annotations

import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path, PurePosixPath
from typing import Any

STATE_DIR = ".reversa"
LOCK_PATH = f"{STATE_DIR}/.lock"


class PathEscapeError(ValueError):
    """A project-relative path that would resolve outside the project root."""


def check_relpath(path: str) -> str:
    """Validate a project-relative, forward-slash path and return it unchanged."""
    if not path or not isinstance(path, str):
        raise PathEscapeError(f"empty path: {path!r}")
    if "\\" in path or "\0" in path:
        raise PathEscapeError(f"invalid character in path: {path!r}")
    if path.startswith("/") or PurePosixPath(path).is_absolute() or (len(path) > 1 and path[1] == ":"):
        raise PathEscapeError(f"absolute path not allowed: {path!r}")
    for part in path.split("/"):
        if part in ("", ".", ".."):
            raise PathEscapeError(f"path escapes or is not normalized: {path!r}")
    return path


def resolve_under(root: Path, relpath: str) -> Path:
    """Join ``relpath`` onto ``root``, refusing escapes and symlinked parents."""
    check_relpath(relpath)
    root = Path(root)
    target = root.joinpath(*relpath.split("/"))
    cur = root
    for part in relpath.split("/")[:-1]:
        cur = cur / part
        if cur.is_symlink():
            raise PathEscapeError(f"symlinked directory in path: {relpath!r}")
    if target.is_symlink():
        raise PathEscapeError(f"refusing to touch symlink: {relpath!r}")
    return target


def atomic_write(path: Path, data: bytes) -> None:
    """Write ``data`` to ``path`` via a temp file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def canonical_json(obj: Any) -> bytes:
    """Sorted keys, 2-space indent, LF, single trailing newline."""
    return (json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def utc_now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


def iter_files(root: Path, base: Path | None = None) -> list[str]:
    """All regular files below ``base`` (default ``root``) as sorted root-relative paths."""
    root = Path(root)
    base = root if base is None else base
    out = []
    if not base.is_dir():
        return out
    for dirpath, dirnames, filenames in os.walk(base):
        dirnames.sort()
        for name in filenames:
            full = Path(dirpath) / name
            if full.is_symlink() or not full.is_file():
                continue
            out.append(full.relative_to(root).as_posix())
    return sorted(out)


class LockError(RuntimeError):
    pass


class ProjectLock:
    """Exclusive project lock backed by ``.reversa/.lock``.

    The lock file holds the owning pid and an acquisition timestamp. A stale
    lock left by a dead process is only removed when ``break_stale`` is set.
    """

    def __init__(self, root: Path, *, break_stale: bool = False):
        self.root = Path(root)
        self.path = self.root / LOCK_PATH
        self.break_stale = break_stale
        self.prune_state_dir = False
        self._created_dir = False
        self._held = False

    def acquire(self) -> "ProjectLock":
        state_dir = self.path.parent
        if not state_dir.exists():
            state_dir.mkdir(parents=True)
            self._created_dir = True
        payload = json.dumps({"pid": os.getpid(), "timestamp": utc_now()}).encode()
        for attempt in (0, 1):
            try:
                fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
            except FileExistsError:
                if self.break_stale and attempt == 0:
                    self.path.unlink(missing_ok=True)
                    continue
                self._cleanup_dir()
                raise LockError(f"project is locked ({self._describe()}); pass --break-lock if the lock is stale")
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            self._held = True
            return self
        raise LockError("could not acquire project lock")  # pragma: no cover

    def _describe(self) -> str:
        try:
            info = json.loads(self.path.read_text(encoding="utf-8"))
            return f"pid {info.get('pid')} since {info.get('timestamp')}"
        except (OSError, ValueError):
            return f"lock file {LOCK_PATH}"

    def _cleanup_dir(self) -> None:
        state_dir = self.path.parent
        if (self._created_dir or self.prune_state_dir) and state_dir.is_dir():
            try:
                state_dir.rmdir()
            except OSError:
                pass

    def release(self) -> None:
        if self._held:
            self.path.unlink(missing_ok=True)
            self._held = False
        self._cleanup_dir()

    def __enter__(self) -> "ProjectLock":
        return self.acquire()

    def __exit__(self, *exc: object) -> None:
        self.release()

