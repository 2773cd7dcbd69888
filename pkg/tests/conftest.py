from __future__ import annotations

import shutil
from importlib import resources
from pathlib import Path

import pytest

FIXTURES = Path(str(resources.files("reversa") / "fixtures"))


@pytest.fixture
def mini_legacy(tmp_path: Path) -> Path:
    """A fresh copy of the bundled mini legacy repository."""
    dest = tmp_path / "repo"
    shutil.copytree(FIXTURES / "mini_legacy", dest)
    return dest


@pytest.fixture
def atm_dir() -> Path:
    return FIXTURES / "atm"


def snapshot(root: Path) -> dict[str, bytes]:
    """Every file under ``root`` keyed by posix relative path."""
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}
