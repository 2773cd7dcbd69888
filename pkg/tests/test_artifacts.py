from __future__ import annotations

import pytest

from reversa.artifacts import (
    ArtifactDocument,
    ArtifactError,
    ArtifactKind,
    MatrixError,
    REGISTRY,
    Severity,
    TraceMatrix,
    build_code_spec_matrix,
    build_spec_impact_matrix,
    detect_dead_links,
    kind_for_path,
    make_document,
    parse_matrix,
    parse_questions,
    parse_tasks,
    render_matrix,
    render_template,
    validate_artifact,
)
from reversa.artifacts.records import RecordError
from reversa.claims import Claim, ClaimStatus, EvidenceRef

K = ArtifactKind
S = ClaimStatus

REQ_SECTIONS = [
    ("Scope", "The conta unit."),
    ("Requirements", "- CLAIM c-0001 [confirmed] :: Debits balance | evidence: src/CONTA.cbl#L1-L4"),
    ("Acceptance", "Balance never negative."),
]


def codes(report) -> list[str]:
    return [v.code for v in report.violations]


def test_conformant_requirements_doc_has_no_violations():
    doc = make_document(K.REQUIREMENTS, REQ_SECTIONS, unit="conta")
    assert doc.path == "specs/conta/requirements.md"
    assert validate_artifact(doc).violations == []


def test_missing_section_is_an_error_naming_it():
    doc = make_document(K.REQUIREMENTS, REQ_SECTIONS[:2], unit="conta")
    report = validate_artifact(doc)
    assert not report.ok
    assert any("Acceptance" in v.message for v in report.errors)


def test_unit_level_doc_needs_spec_id():
    text = "---\nkind: requirements\nversion: 1\n---\n\n# R\n\n## Scope\n\n## Requirements\n\n## Acceptance\n"
    doc = ArtifactDocument.from_text("specs/conta/requirements.md", text)
    assert any("spec_id" in v.message for v in validate_artifact(doc).errors)


def test_duplicate_heading_is_an_error():
    doc = make_document(K.DESIGN, [("Design", "a"), ("Design", "b")], unit="conta")
    assert not validate_artifact(doc).ok


def test_unevidenced_confirmed_claim_is_warning_then_error():
    sections = [REQ_SECTIONS[0], ("Requirements", "- CLAIM c-0001 [confirmed] :: no anchor"), REQ_SECTIONS[2]]
    doc = make_document(K.REQUIREMENTS, sections, unit="conta")
    soft = validate_artifact(doc)
    assert soft.ok and [v.severity for v in soft.warnings] == [Severity.WARNING]
    hard = validate_artifact(doc, escalate_unevidenced=True)
    assert not hard.ok


def test_malformed_claim_line_is_reported():
    sections = [REQ_SECTIONS[0], ("Requirements", "- CLAIM c-1 [maybe] :: x"), REQ_SECTIONS[2]]
    doc = make_document(K.REQUIREMENTS, sections, unit="conta")
    assert validate_artifact(doc).violations


def test_unknown_kind_is_an_error():
    with pytest.raises((ArtifactError, ValueError)):
        make_document("poetry", [])


def test_validation_is_idempotent():
    doc = make_document(K.REQUIREMENTS, REQ_SECTIONS[:1], unit="conta")
    assert validate_artifact(doc).to_dict() == validate_artifact(doc).to_dict()


@pytest.mark.parametrize("kind", list(K))
def test_every_kind_has_template_and_path(kind):
    text = render_template(kind)
    assert text
    schema = REGISTRY[kind]
    path = schema.path.format(unit="u", name="n")
    assert kind_for_path(path) is kind


def test_kind_for_unknown_path():
    assert kind_for_path("random/notes.md") is None


def _claim(cid, spec, *refs, status=S.CONFIRMED):
    return Claim(cid, spec, status, "t", tuple(refs))


def test_code_spec_matrix_counts_citations():
    claims = [_claim("c-0001", "A", EvidenceRef("F", 1), EvidenceRef("F", 9))]
    m = build_code_spec_matrix(claims, ["G"])
    assert m.cells == {("F", "A"): 2}
    assert m.rows == ["F", "G"]
    assert m.covered_rows() == ["F"]
    empty = build_code_spec_matrix([], ["x", "y"])
    assert empty.rows == ["x", "y"] and empty.cells == {}


def test_every_confirmed_claim_contributes_a_cell():
    claims = [_claim(f"c-{n:04d}", f"s{n % 3}", EvidenceRef(f"f{n % 4}", 1)) for n in range(1, 20)]
    m = build_code_spec_matrix(claims)
    for c in claims:
        assert (c.evidence[0].path, c.spec_id) in m.cells


def test_spec_impact_matrix():
    m = build_spec_impact_matrix(["A"], ["X", "Y"], [("A", "X"), ("A", "Y")])
    assert m.cells == {("A", "X"): 1, ("A", "Y"): 1}
    bare = build_spec_impact_matrix(["A"], ["X"], [])
    assert bare.rows == ["A"] and bare.cols == ["X"] and bare.cells == {}
    with pytest.raises(MatrixError, match="Z"):
        build_spec_impact_matrix(["A"], ["X"], [("Z", "X")])


def test_render_matrix_roundtrip_and_layout():
    m = TraceMatrix(["f1", "f2"], ["A", "B"], {("f1", "B"): 3})
    text = render_matrix(m)
    assert render_matrix(parse_matrix(text)) == text
    body_rows = text.strip().splitlines()[2:]
    filled = [cell for row in body_rows for cell in row.strip("|").split("|")[1:] if cell.strip()]
    assert filled == [" 3 "]
    assert render_matrix(TraceMatrix([], [])).strip().count("\n") == 1


def test_rendered_matrix_validates():
    m = TraceMatrix(["f1"], ["A"], {("f1", "A"): 1})
    doc = make_document(K.CODE_SPEC_MATRIX, [("Matrix", render_matrix(m))])
    assert validate_artifact(doc).ok


def test_dead_links():
    claims = [
        _claim("c-0001", "A", EvidenceRef("gone.cbl", 1)),
        _claim("c-0002", "A", EvidenceRef("ok.cbl", 2, 50)),
        _claim("c-0003", "A", EvidenceRef("ok.cbl", 1, 3)),
    ]
    m = build_code_spec_matrix(claims)
    dead = detect_dead_links(m, {"ok.cbl"}, {"ok.cbl": 10})
    assert [(d.claim_id, d.path, d.reason) for d in dead] == [
        ("c-0001", "gone.cbl", "file not found"),
        ("c-0002", "ok.cbl", "range out of bounds"),
    ]
    assert detect_dead_links(m, {"ok.cbl", "gone.cbl"}, {"ok.cbl": 100, "gone.cbl": 5}) == []


def test_questions_and_tasks_records():
    qs = parse_questions("- Q q-01 [answered] :: Which limit?\n  answer: 1000 per day\n- Q q-02 [open] :: Why?\n")
    assert [(q.id, q.status.value, q.answer) for q in qs] == [("q-01", "answered", "1000 per day"), ("q-02", "open", None)]
    tasks = parse_tasks("- TASK t-01 [completed] :: Do it | evidence: a.go#L1\n")
    assert tasks[0].evidence == (EvidenceRef("a.go", 1),)
    with pytest.raises(RecordError):
        parse_tasks("- TASK t-01 [done] :: bad status\n")


def test_atm_task_plan(atm_dir):
    from reversa.metrics import summarize_tasks

    summary = summarize_tasks((atm_dir / "tasks.md").read_text(encoding="utf-8"))
    assert summary.counts == {"completed": 9, "in-progress": 1, "pending": 1}
    assert len(summary.tasks) == 11
