from __future__ import annotations

import json
from pathlib import Path

import pytest

from reversa.installer import (
    DEFAULT_ENGINES,
    InstallConfig,
    InstallError,
    InstallValidationError,
    add_agent,
    add_engine,
    detect_engines,
    engine_table,
    install,
    state_files,
    status,
    uninstall,
    update,
)
from reversa.manifest import FileClass, ManifestError, load_manifest
from reversa.teams import get_team

from conftest import snapshot

DISCOVERY_ROLES = ("scout", "archaeologist", "detective", "architect", "writer", "reviewer")


def test_discovery_team_has_the_six_roles_in_order():
    assert get_team("discovery").agents == DISCOVERY_ROLES


def test_engine_table_has_thirteen_unique_ids():
    ids = [e.id for e in DEFAULT_ENGINES]
    assert len(ids) == 13 == len(set(ids))


def test_detect_engines(tmp_path):
    assert detect_engines(tmp_path) == []
    (tmp_path / ".cursor").mkdir()
    (tmp_path / ".claude").mkdir()
    # table order, not creation order
    assert [e.id for e in detect_engines(tmp_path)] == ["claude-code", "cursor"]


def test_engine_override_from_config():
    table = engine_table({"claude-code": {"marker": ".cc"}, "zed": {"marker": ".zed", "skills_dir": ".zed/skills"}})
    by_id = {e.id: e for e in table}
    assert by_id["claude-code"].marker == ".cc"
    assert by_id["zed"].entry_file == "AGENTS.md"


def test_install_counts_and_status_all_intact(tmp_path):
    report = install(InstallConfig(["claude-code"]), tmp_path)
    assert report.ok
    # 6 discovery roles + 1 orchestrator skill + 1 entry file + state layout
    expected = 6 + 1 + 1 + len(state_files(InstallConfig(["claude-code"])))
    assert len(load_manifest(tmp_path).entries) == expected == len(report.written)
    st = status(tmp_path)
    assert st.counts == {"intact": expected, "modified": 0, "missing": 0, "untracked": 0}
    assert (tmp_path / "CLAUDE.md").is_file()
    for name in ("state.json", "config.toml", "config.user.toml", "plan.md", "VERSION", "install-meta.json"):
        assert (tmp_path / ".reversa" / name).is_file()


def test_install_validation_errors_write_nothing(tmp_path):
    with pytest.raises(InstallValidationError):
        install(InstallConfig([]), tmp_path)
    with pytest.raises(InstallValidationError):
        install(InstallConfig(["claude-code"], output_root="/abs"), tmp_path)
    assert list(tmp_path.iterdir()) == []


def test_second_install_is_refused(tmp_path):
    install(InstallConfig(["codex"]), tmp_path)
    with pytest.raises(InstallError, match="already installed"):
        install(InstallConfig(["codex"]), tmp_path)


def test_install_dry_run_writes_nothing(tmp_path):
    report = install(InstallConfig(["codex"]), tmp_path, dry_run=True)
    assert report.ok and report.dry_run and report.outcomes
    assert list(tmp_path.iterdir()) == []


def test_install_then_uninstall_restores_tree(tmp_path):
    (tmp_path / "src").mkdir()
    (tmp_path / "src" / "a.cbl").write_bytes(b"legacy\r\n")
    (tmp_path / "AGENTS.md").write_text("user notes\n")
    before = snapshot(tmp_path)
    install(InstallConfig(["codex", "claude-code"], teams=["discovery", "migration"]), tmp_path)
    assert uninstall(tmp_path).ok
    assert snapshot(tmp_path) == before
    assert sorted(p.name for p in tmp_path.iterdir()) == ["AGENTS.md", "src"]


def test_preexisting_entry_file_is_not_overwritten(tmp_path):
    (tmp_path / "AGENTS.md").write_text("mine\n")
    install(InstallConfig(["codex"]), tmp_path)
    assert (tmp_path / "AGENTS.md").read_text() == "mine\n"
    assert "AGENTS.md" not in load_manifest(tmp_path).entries


def test_add_engine_delta_and_idempotence(tmp_path):
    install(InstallConfig(["claude-code"]), tmp_path)
    before = load_manifest(tmp_path)
    report = add_engine(tmp_path, "codex")
    after = load_manifest(tmp_path)
    assert len(after.entries) - len(before.entries) == 6 + 1 + 1
    for path, entry in before.entries.items():
        assert after.entries[path] == entry
    again = add_engine(tmp_path, "codex")
    assert again.ok and again.written == []
    assert report.written and all(p.startswith(".codex/") or p == "AGENTS.md" for p in report.written)


def test_unknown_engine_lists_candidates(tmp_path):
    install(InstallConfig(["claude-code"]), tmp_path)
    with pytest.raises(InstallValidationError) as exc:
        add_engine(tmp_path, "emacs")
    assert "emacs" in str(exc.value) and "claude-code" in str(exc.value)


def test_add_agent_installs_team_skills_for_every_engine(tmp_path):
    install(InstallConfig(["claude-code", "codex"]), tmp_path)
    report = add_agent(tmp_path, "migration")
    roles = get_team("migration").agents
    skills = [p for p in report.written if p.endswith("/SKILL.md")]
    assert len(skills) == 2 * len(roles)
    assert add_agent(tmp_path, "migration").written == []
    meta = json.loads((tmp_path / ".reversa" / "install-meta.json").read_text())
    assert meta["teams"] == ["discovery", "migration"]


def test_status_reports_modified_and_missing(tmp_path):
    install(InstallConfig(["claude-code"]), tmp_path)
    skill = tmp_path / ".claude/skills/reversa-scout/SKILL.md"
    skill.write_bytes(skill.read_bytes() + b"x")
    (tmp_path / "CLAUDE.md").unlink()
    (tmp_path / ".claude/skills/reversa-scout/notes.md").write_text("mine")
    st = status(tmp_path)
    assert st.classes[".claude/skills/reversa-scout/SKILL.md"] is FileClass.MODIFIED
    assert st.classes["CLAUDE.md"] is FileClass.MISSING
    assert st.counts["modified"] == 1 and st.counts["missing"] == 1
    assert st.untracked == [".claude/skills/reversa-scout/notes.md"]


def test_status_without_install(tmp_path):
    with pytest.raises((InstallError, ManifestError), match="not installed"):
        status(tmp_path)


def test_update_preserves_modified_and_user_config(tmp_path, monkeypatch):
    install(InstallConfig(["claude-code"]), tmp_path)
    skill = tmp_path / ".claude/skills/reversa-scout/SKILL.md"
    skill.write_text("my edit")
    user_cfg = tmp_path / ".reversa/config.user.toml"
    user_cfg.write_text("[pipeline]\ntimeout_seconds = 5\n")
    (tmp_path / "CLAUDE.md").unlink()
    report = update(tmp_path)
    assert report.ok
    assert skill.read_text() == "my edit"
    assert user_cfg.read_text() == "[pipeline]\ntimeout_seconds = 5\n"
    assert (tmp_path / "CLAUDE.md").is_file()
    assert status(tmp_path).classes[".claude/skills/reversa-scout/SKILL.md"] is FileClass.MODIFIED


def test_update_refuses_major_version_change(tmp_path):
    install(InstallConfig(["claude-code"]), tmp_path)
    (tmp_path / ".reversa/VERSION").write_text("9.0.0\n")
    with pytest.raises(InstallError, match="major"):
        update(tmp_path)
    assert update(tmp_path, force=True).ok


def test_uninstall_keeps_modified_and_untracked(tmp_path):
    install(InstallConfig(["claude-code"]), tmp_path)
    skill = tmp_path / ".claude/skills/reversa-scout/SKILL.md"
    skill.write_text("my edit")
    extra = tmp_path / ".claude/skills/reversa-writer/mine.md"
    extra.write_text("mine")
    assert uninstall(tmp_path).ok
    assert skill.read_text() == "my edit"
    assert extra.read_text() == "mine"
    assert not (tmp_path / "CLAUDE.md").exists()
    assert not (tmp_path / ".reversa/_config/files-manifest.json").exists()


def test_uninstall_dry_run_writes_nothing(tmp_path):
    install(InstallConfig(["claude-code"]), tmp_path)
    before = snapshot(tmp_path)
    assert uninstall(tmp_path, dry_run=True).ok
    assert snapshot(tmp_path) == before


def test_held_lock_blocks_mutation(tmp_path):
    from reversa._fs import LockError, ProjectLock

    install(InstallConfig(["claude-code"]), tmp_path)
    with ProjectLock(tmp_path):
        with pytest.raises(LockError):
            update(tmp_path)


def test_skill_payload_is_verbatim(tmp_path):
    from reversa.installer import skill_text

    install(InstallConfig(["claude-code"]), tmp_path)
    assert (tmp_path / ".claude/skills/reversa-writer/SKILL.md").read_bytes() == skill_text("writer")
