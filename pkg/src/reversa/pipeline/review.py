"""Mechanical review rules applied after the writers.

The checks are about evidence only: is there any, and does it resolve to a
file and line range that exists. Judging whether the evidence actually
supports the claim is left to the executor.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from ..artifacts import ArtifactDocument, ArtifactKind, Question, QuestionStatus, make_document, render_matrix
from ..artifacts.matrix import TraceMatrix, build_code_spec_matrix, detect_dead_links
from ..claims import (
    DEFAULT_WEIGHTS,
    Claim,
    ClaimStatus,
    ConfidenceReport,
    Gap,
    GapSeverity,
    build_confidence_report,
    reclassify_claim,
    render_confidence_table,
)

REVIEWER = "reviewer"
K = ArtifactKind


@dataclass(frozen=True)
class Reclassification:
    claim_id: str
    prior: ClaimStatus
    status: ClaimStatus
    reason: str


@dataclass
class ReviewResult:
    claims: list[Claim]
    reclassifications: list[Reclassification]
    questions: list[Question]
    gaps: list[Gap]
    report: ConfidenceReport | None
    matrix: TraceMatrix
    new_questions: list[Question] = field(default_factory=list)


def _next_id(prefix: str, taken: Iterable[str]) -> str:
    nums = [int(t.split("-", 1)[1]) for t in taken]
    return f"{prefix}-{max(nums, default=0) + 1:02d}"


def review_stage(
    claims: Sequence[Claim],
    repository_files: Mapping[str, int],
    *,
    questions: Sequence[Question] = (),
    gaps: Sequence[Gap] = (),
    inventory: Iterable[str] = (),
    weights: Sequence = DEFAULT_WEIGHTS,
) -> ReviewResult:
    """Apply the review rules. Pure.

    * confirmed claim without evidence -> inferred, plus a question
    * evidence pointing at a missing file or past its last line -> a question,
      and a confirmed claim is lowered to inferred
    * gap claim -> an entry in the gap register unless one already cites it

    Claims are only ever lowered here; raising one needs a human.
    """
    claims = sorted(claims, key=lambda c: c.id)
    dead_by_claim: dict[str, list[str]] = {}
    for d in detect_dead_links(build_code_spec_matrix(claims), repository_files.keys(), repository_files):
        dead_by_claim.setdefault(d.claim_id, []).append(f"{d.path} ({d.reason})")

    out_claims: list[Claim] = []
    changes: list[Reclassification] = []
    asked = {q.text for q in questions}
    all_questions = list(questions)
    new_questions: list[Question] = []

    def ask(text: str) -> None:
        if text in asked:
            return
        asked.add(text)
        q = Question(_next_id("q", [x.id for x in all_questions]), QuestionStatus.OPEN, text)
        all_questions.append(q)
        new_questions.append(q)

    for claim in claims:
        reason = None
        if claim.status is ClaimStatus.CONFIRMED and not claim.evidence:
            reason = "no evidence cited"
            ask(f"{claim.id}: confirmed claim cites no evidence; which code supports it?")
        elif claim.id in dead_by_claim:
            links = ", ".join(dead_by_claim[claim.id])
            ask(f"{claim.id}: evidence does not resolve: {links}; where does this behavior live now?")
            if claim.status is ClaimStatus.CONFIRMED:
                reason = f"dead evidence: {links}"
        if reason is not None:
            changed = reclassify_claim(claim, ClaimStatus.INFERRED, reason, REVIEWER)
            changes.append(Reclassification(claim.id, claim.status, changed.status, reason))
            claim = changed
        out_claims.append(claim)

    all_gaps = list(gaps)
    for claim in out_claims:
        if claim.status is not ClaimStatus.GAP:
            continue
        if any(g.description.startswith(f"{claim.id}:") for g in all_gaps):
            continue
        all_gaps.append(Gap(_next_id("g", [g.id for g in all_gaps]), GapSeverity.MODERATE, f"{claim.id}: {claim.text}"))

    report = build_confidence_report(out_claims, weights=weights) if out_claims else None
    matrix = build_code_spec_matrix(out_claims, inventory)
    return ReviewResult(out_claims, changes, all_questions, all_gaps, report, matrix, new_questions)


def render_register(claims: Sequence[Claim]) -> str:
    units: dict[str, list[Claim]] = {}
    for c in claims:
        units.setdefault(c.spec_id, []).append(c)
    blocks = []
    for unit in sorted(units):
        blocks.append(f"### Unit: {unit}\n\n" + "\n".join(c.render() for c in units[unit]))
    return "\n\n".join(blocks)


def review_documents(result: ReviewResult, generated_by: str) -> list[ArtifactDocument]:
    """The four reviewer artifacts for a review result."""
    if result.report is None:
        distribution = "No claims in scope."
    else:
        distribution = render_confidence_table(result.report)
    changes = "\n".join(
        f"- {r.claim_id}: {r.prior.value} -> {r.status.value} ({r.reason})" for r in result.reclassifications
    )
    return [
        make_document(
            K.QUESTIONS,
            [("Questions", "\n".join(q.render() for q in result.questions) or "None.")],
            generated_by=generated_by,
        ),
        make_document(
            K.GAPS, [("Gaps", "\n".join(g.render() for g in result.gaps) or "None.")], generated_by=generated_by
        ),
        make_document(
            K.CONFIDENCE_REPORT,
            [
                ("Distribution", distribution),
                ("Reclassifications", changes or "None."),
                ("Register", render_register(result.claims) or "No claims."),
            ],
            generated_by=generated_by,
        ),
        make_document(K.CODE_SPEC_MATRIX, [("Matrix", render_matrix(result.matrix))], generated_by=generated_by),
    ]
