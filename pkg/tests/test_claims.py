from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reversa.claims import (
    Claim,
    ClaimError,
    ClaimStatus,
    EvidenceRef,
    Gap,
    GapSeverity,
    GapTreatment,
    blocking_gaps,
    build_confidence_report,
    confidence_index,
    parse_claim_lines,
    parse_gap_lines,
    reclassify_claim,
    render_confidence_table,
    replay_status,
    summarize_gaps,
)

S = ClaimStatus

# (spec, confirmed, inferred, gap, printed index)
ATM_UNITS = [
    ("menu", 32, 1, 0, 98.5),
    ("conta", 129, 6, 0, 97.8),
    ("extrato", 124, 9, 1, 95.9),
    ("util", 115, 4, 2, 96.7),
    ("kbdread", 90, 4, 0, 97.9),
]


def oracle_tenths(c: int, i: int, g: int) -> int:
    """Index in tenths of a percent using integer arithmetic only.

    index*10 = 1000*(2c + i) / (2*total); half-up is floor(x + 1/2).
    """
    num, den = 1000 * (2 * c + i), 2 * (c + i + g)
    return (2 * num + den) // (2 * den)


def make_claims(spec: str, c: int, i: int, g: int, start: int = 1) -> list[Claim]:
    out, n = [], start
    for status, count in ((S.CONFIRMED, c), (S.INFERRED, i), (S.GAP, g)):
        for _ in range(count):
            ev = (EvidenceRef(f"src/{spec}.cbl", 1, 2),) if status is S.CONFIRMED else ()
            out.append(Claim(f"c-{n:04d}", spec, status, "x", ev))
            n += 1
    return out


@pytest.mark.parametrize("spec, c, i, g, printed", ATM_UNITS)
def test_atm_unit_indices(spec, c, i, g, printed):
    assert confidence_index(c, i, g) == printed
    assert oracle_tenths(c, i, g) == round(printed * 10)


def test_atm_report_and_total():
    claims, n = [], 1
    for spec, c, i, g, _ in ATM_UNITS:
        claims += make_claims(spec, c, i, g, n)
        n += c + i + g
    report = build_confidence_report(claims, order=[r[0] for r in ATM_UNITS])
    assert [(r.spec_id, r.index) for r in report.rows] == [(r[0], r[4]) for r in ATM_UNITS]
    t = report.total
    assert (t.confirmed, t.inferred, t.gap, t.total, t.index) == (490, 24, 3, 517, 97.1)
    table = render_confidence_table(report)
    assert "| Active total | 490 | 24 | 3 | 97.1% |" in table


def test_report_rows_default_to_lexicographic_order():
    claims = make_claims("b", 1, 0, 0) + make_claims("a", 1, 0, 0, start=2)
    assert [r.spec_id for r in build_confidence_report(claims).rows] == ["a", "b"]


def test_index_edge_cases():
    assert confidence_index(7, 0, 0) == 100.0
    assert confidence_index(0, 0, 3) == 0.0
    assert confidence_index(0, 1, 0) == 50.0
    with pytest.raises(ClaimError, match="no claims in scope"):
        confidence_index(0, 0, 0)


def test_half_up_at_exact_tie():
    # 1 inferred of 40 is exactly 1.25; 1 of 1000 is exactly 0.05
    assert confidence_index(0, 1, 39) == 1.3
    assert confidence_index(0, 1, 999) == 0.1


def test_custom_weights():
    assert confidence_index(1, 1, 0, weights=(1, Fraction(1, 4), 0)) == 62.5


counts = st.integers(min_value=0, max_value=10_000)


@settings(max_examples=300, deadline=None)
@given(counts, counts, counts)
def test_index_matches_integer_oracle(c, i, g):
    if c + i + g == 0:
        return
    assert round(confidence_index(c, i, g) * 10) == oracle_tenths(c, i, g)


@settings(max_examples=200, deadline=None)
@given(counts, counts, counts)
def test_index_bounds_and_monotonicity(c, i, g):
    if c + i + g == 0:
        return
    idx = confidence_index(c, i, g)
    assert 0.0 <= idx <= 100.0
    assert confidence_index(c + 1, i, g) >= idx
    assert confidence_index(c, i, g + 1) <= idx


def test_claim_line_parsing():
    text = (
        "intro\n"
        "- CLAIM c-0001 [confirmed] :: Withdraw debits balance | evidence: src/CONTA.cbl#L120-L188\n"
        "- CLAIM c-0002 [confirmed] :: text\n"
        "- CLAIM bogus\n"
    )
    diags = []
    claims = parse_claim_lines(text, diagnostics=diags)
    assert [c.id for c in claims] == ["c-0001", "c-0002"]
    assert claims[0].evidence == (EvidenceRef("src/CONTA.cbl", 120, 188),)
    assert claims[1].flags
    messages = [d.message for d in diags]
    assert any("confirmed claim without evidence" in m for m in messages)
    assert any("malformed" in m for m in messages)
    assert parse_claim_lines("no claims here\n") == []


def test_duplicate_claim_id_is_an_error():
    text = "- CLAIM c-0001 [gap] :: a\n- CLAIM c-0001 [gap] :: b\n"
    with pytest.raises(ClaimError, match="duplicate"):
        parse_claim_lines(text)


def test_unit_heading_sets_spec():
    text = "### Unit: conta\n- CLAIM c-0001 [gap] :: a\n### Unit: util\n- CLAIM c-0002 [gap] :: b\n"
    assert [c.spec_id for c in parse_claim_lines(text)] == ["conta", "util"]


def test_render_parse_roundtrip_with_history():
    c = Claim("c-0009", "menu", S.CONFIRMED, "t", (EvidenceRef("a.cbl", 3),))
    c = reclassify_claim(c, S.INFERRED, "no direct code anchor", "reviewer")
    (back,) = parse_claim_lines(c.render(), spec_id="menu")
    assert back == c
    assert replay_status(back) is S.INFERRED


def test_reclassify_rules():
    ev = (EvidenceRef("a.cbl", 1),)
    c = Claim("c-0001", "m", S.CONFIRMED, "t", ev)
    down = reclassify_claim(c, S.INFERRED, "no direct code anchor", "reviewer")
    assert len(down.history) == 1 and down.evidence == ev

    bare = Claim("c-0002", "m", S.INFERRED, "t")
    with pytest.raises(ClaimError, match="without evidence"):
        reclassify_claim(bare, S.CONFIRMED, "looks right", "human")

    gap = Claim("c-0003", "m", S.GAP, "t", ev)
    with pytest.raises(ClaimError, match="human"):
        reclassify_claim(gap, S.CONFIRMED, "answered", "reviewer")
    up = reclassify_claim(gap, S.CONFIRMED, "answered q-01", "human:ana")
    assert up.status is S.CONFIRMED and up.history[0].prior is S.GAP

    with pytest.raises(ClaimError, match="reason"):
        reclassify_claim(c, S.GAP, " ", "reviewer")


def test_confirmed_claim_requires_evidence_at_reclassify_time_only():
    # parsing keeps a flagged claim rather than rejecting it
    (c,) = parse_claim_lines("- CLAIM c-0001 [confirmed] :: x\n")
    assert c.status is S.CONFIRMED and not c.evidence


def test_gap_invariants():
    with pytest.raises(ClaimError):
        Gap("g-01", GapSeverity.OUT_OF_SCOPE, "x", GapTreatment.RESIDUAL)
    with pytest.raises(ClaimError):
        Gap("g-01", GapSeverity.CRITICAL, "x", GapTreatment.RESOLVED)
    with pytest.raises(ClaimError):
        Gap("gap-1", GapSeverity.CRITICAL, "x")


def test_blocking_rule():
    gaps = [
        Gap("g-01", GapSeverity.CRITICAL, "a"),
        Gap("g-02", GapSeverity.CRITICAL, "b", GapTreatment.RESOLVED, "decided"),
        Gap("g-03", GapSeverity.MODERATE, "c"),
        Gap("g-04", GapSeverity.CRITICAL, "d", GapTreatment.RESIDUAL),
    ]
    assert [g.id for g in blocking_gaps(gaps)] == ["g-01", "g-04"]


def test_empty_gap_summary():
    s = summarize_gaps([])
    assert s.total == 0
    assert set(s.by_severity.values()) == {0} and set(s.by_treatment.values()) == {0}
    assert s.blocking == []


def test_atm_gap_register(atm_dir):
    s = summarize_gaps(parse_gap_lines((atm_dir / "gaps.md").read_text(encoding="utf-8")))
    assert s.total == 10
    assert s.by_severity == {"critical": 3, "moderate": 3, "cosmetic": 2, "out-of-scope": 2}
    assert s.by_treatment == {"open": 0, "resolved-by-decision": 5, "residual": 3, "excluded-from-scope": 2}
    assert s.blocking == []


def test_malformed_gap_line_is_a_diagnostic():
    diags = []
    gaps = parse_gap_lines("- GAP g-01 [critical] :: no treatment\n", diags)
    assert gaps == [] and diags


@given(st.integers(1, 10_000), st.integers(0, 10_000), st.integers(0, 10_000))
def test_downgrade_lowers_exact_index_but_rounding_may_tie(c, i, g):
    exact = lambda c, i, g: Fraction(100 * (2 * c + i), 2 * (c + i + g))  # noqa: E731
    assert exact(c - 1, i + 1, g) < exact(c, i, g)
    assert confidence_index(c - 1, i + 1, g) <= confidence_index(c, i, g)


def test_rounding_tie_after_downgrade():
    assert confidence_index(9999, 1, 0) == confidence_index(10000, 0, 0) == 100.0
