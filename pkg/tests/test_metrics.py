from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from reversa.artifacts import ArtifactKind, TraceMatrix, make_document
from reversa.claims import Claim, ClaimStatus, EvidenceRef
from reversa.config import Config
from reversa.installer import InstallConfig, install
from reversa.metrics import (
    MetricsError,
    assemble_audit_package,
    compute_metrics,
    file_coverage,
    render_fraction,
    summarize_tasks,
    traceability_density,
    unit_coverage,
    verify_audit_package,
)
from reversa.artifacts.records import RecordError
from reversa.pipeline import MockExecutor, run_team

import naive

K = ArtifactKind
S = ClaimStatus


def test_file_coverage_examples():
    inv = [f"f{i}" for i in range(10)]
    m = TraceMatrix(inv, ["A"], {(f"f{i}", "A"): 1 for i in range(7)})
    assert file_coverage(inv, m) == Fraction(7, 10)
    assert file_coverage(["a"], TraceMatrix(["a"], ["A"], {("a", "A"): 2})) == 1
    assert file_coverage(["a"], TraceMatrix(["a"], ["A"])) == 0
    with pytest.raises(MetricsError, match="no relevant files"):
        file_coverage([], TraceMatrix([], []))


def test_unit_coverage_examples():
    units = ["menu", "conta", "extrato", "util", "kbdread"]
    assert unit_coverage(units, units) == 1
    assert unit_coverage(units, units[:4]) == Fraction(4, 5)
    assert unit_coverage(units, []) == 0
    with pytest.raises(MetricsError):
        unit_coverage([], [])


def test_density_examples():
    assert render_fraction(traceability_density([2, 1, 0])) == "1.00"
    assert render_fraction(traceability_density([1, 1, 1])) == "1.00"
    assert render_fraction(traceability_density([4])) == "4.00"
    assert render_fraction(Fraction(1, 8)) == "0.13"
    with pytest.raises(MetricsError):
        traceability_density([])


def test_task_summary(atm_dir):
    s = summarize_tasks((atm_dir / "tasks.md").read_text(encoding="utf-8"))
    assert s.counts == {"completed": 9, "in-progress": 1, "pending": 1}
    assert [t.id for t in s.tasks] == [f"t-{n:02d}" for n in range(1, 12)]
    assert summarize_tasks([]).counts == {"completed": 0, "in-progress": 0, "pending": 0}
    with pytest.raises(RecordError, match="line 1"):
        summarize_tasks("- TASK t-01 [donezo] :: x\n")


# --- oracle equivalence on generated trees ----------------------------------


@st.composite
def artifact_tree(draw):
    n_files = draw(st.integers(1, 50))
    files = {f"src/M{i:02d}.cbl": draw(st.integers(1, 40)) for i in range(n_files)}
    units = sorted({p.split("/")[1].split(".")[0].lower() for p in files})
    n_claims = draw(st.integers(1, 200))
    claims = []
    for n in range(1, n_claims + 1):
        status = draw(st.sampled_from(list(S)))
        k = draw(st.integers(1 if status is S.CONFIRMED else 0, 3))
        refs = []
        for _ in range(k):
            path = draw(st.sampled_from(sorted(files)))
            start = draw(st.integers(1, files[path]))
            refs.append(EvidenceRef(path, start, draw(st.integers(start, files[path]))))
        claims.append(Claim(f"c-{n:04d}", draw(st.sampled_from(units)), status, f"claim {n}", tuple(refs)))
    tasks = draw(st.lists(st.integers(0, 2), max_size=10))
    return files, units, claims, tasks


def write_tree(root: Path, files, claims, tasks) -> None:
    for rel, lines in files.items():
        p = root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text("".join(f"line {i}\n" for i in range(lines)))
    out = root / "_reversa_sdd"
    by_unit: dict[str, list[Claim]] = {}
    for c in claims:
        by_unit.setdefault(c.spec_id, []).append(c)
    for unit, cs in by_unit.items():
        body = "\n".join(c.render() for c in cs)
        doc = make_document(K.REQUIREMENTS, [("Scope", unit), ("Requirements", body), ("Acceptance", "-")], unit=unit)
        (out / doc.path).parent.mkdir(parents=True, exist_ok=True)
        (out / doc.path).write_text(doc.text)
    if tasks:
        first = sorted(files)[0]
        lines = [
            f"- TASK t-{i + 1:02d} [completed] :: task" + (" | evidence: " + ", ".join([first] * k) if k else "")
            for i, k in enumerate(tasks)
        ]
        unit = sorted(by_unit)[0]
        doc = make_document(K.TASKS, [("Tasks", "\n".join(lines))], unit=unit)
        (out / doc.path).write_text(doc.text)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(artifact_tree())
def test_metrics_equal_naive_recount(tmp_path_factory, tree):
    files, units, claims, tasks = tree
    root = tmp_path_factory.mktemp("tree")
    write_tree(root, files, claims, tasks)
    report = compute_metrics(root, Config())
    expected = naive.recount(root, units)
    assert report.file_coverage == expected["file_coverage"]
    assert report.unit_coverage == expected["unit_coverage"]
    assert report.traceability_density == expected["traceability_density"]
    c = sum(1 for x in claims if x.status is S.CONFIRMED)
    i = sum(1 for x in claims if x.status is S.INFERRED)
    assert report.confidence_distribution[:3] == (c, i, len(claims) - c - i)


def test_metrics_on_mock_run_equal_naive_recount(mini_legacy):
    install(InstallConfig(["claude-code"]), mini_legacy)
    run_team(mini_legacy, "discovery", MockExecutor())
    report = compute_metrics(mini_legacy)
    expected = naive.recount(mini_legacy, ["conta", "extrato", "kbdread", "menu", "util"])
    assert report.file_coverage == expected["file_coverage"] == 1
    assert report.unit_coverage == expected["unit_coverage"] == 1
    assert report.traceability_density == expected["traceability_density"]
    assert report.expert_precision == report.agent_utility == "not measured"


def test_coverage_is_monotone_when_claims_are_added():
    inv = ["a", "b", "c"]
    small = TraceMatrix(inv, ["A"], {("a", "A"): 1})
    big = TraceMatrix(inv, ["A", "B"], {("a", "A"): 1, ("b", "B"): 1})
    assert file_coverage(inv, small) <= file_coverage(inv, big)


# --- audit package -----------------------------------------------------------


@pytest.fixture
def audited(mini_legacy) -> Path:
    install(InstallConfig(["claude-code"], project_name="mini", analyzed_version="1.0"), mini_legacy)
    run_team(mini_legacy, "discovery", MockExecutor())
    return mini_legacy


def test_audit_package_is_complete_and_verifiable(audited):
    index = assemble_audit_package(audited)
    for key in ("project", "configuration", "engines", "teams", "artifacts", "reports", "parity_scenarios", "task_plan"):
        assert key in index
    assert index["project"] == {"name": "mini", "analyzed_version": "1.0"}
    assert index["engines"] == ["claude-code"] and index["teams"] == ["discovery"]
    assert verify_audit_package(audited, index) == []
    on_disk = json.loads((audited / "_reversa_sdd/audit/package-index.json").read_text())
    assert on_disk == index


def test_audit_package_is_deterministic(audited):
    assemble_audit_package(audited)
    first = (audited / "_reversa_sdd/audit/package-index.json").read_bytes()
    assemble_audit_package(audited)
    assert (audited / "_reversa_sdd/audit/package-index.json").read_bytes() == first


def test_audit_package_detects_tampering(audited):
    index = assemble_audit_package(audited)
    (audited / "_reversa_sdd/discovery/inventory.md").write_text("tampered")
    assert verify_audit_package(audited, index) == ["_reversa_sdd/discovery/inventory.md"]


def test_missing_confidence_report_fails(audited):
    (audited / "_reversa_sdd/discovery/confidence-report.md").unlink()
    with pytest.raises(MetricsError, match="package incomplete: confidence report"):
        assemble_audit_package(audited)


def test_audit_needs_a_run(mini_legacy):
    install(InstallConfig(["claude-code"]), mini_legacy)
    with pytest.raises(MetricsError, match="package incomplete"):
        assemble_audit_package(mini_legacy)


def test_audit_dry_run_writes_nothing(audited):
    assemble_audit_package(audited, dry_run=True)
    assert not (audited / "_reversa_sdd/audit").exists()
