"""Confidence model: claims, evidence anchors, project gaps and the confidence index.

Claims live inside artifact documents as single lines::

    - CLAIM c-0001 [confirmed] :: Withdraw debits balance | evidence: src/CONTA.cbl#L120-L188

An indented ``history:`` line under a claim records one reclassification::

      history: confirmed -> inferred :: reviewer :: no direct code anchor

Gaps use ``- GAP g-01 [critical] [resolved-by-decision] :: text`` with an
optional ``decision:`` continuation line.
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction


class ClaimError(ValueError):
    pass


class ClaimStatus(str, enum.Enum):
    CONFIRMED = "confirmed"
    INFERRED = "inferred"
    GAP = "gap"


_RANK = {ClaimStatus.GAP: 0, ClaimStatus.INFERRED: 1, ClaimStatus.CONFIRMED: 2}


class GapSeverity(str, enum.Enum):
    CRITICAL = "critical"
    MODERATE = "moderate"
    COSMETIC = "cosmetic"
    OUT_OF_SCOPE = "out-of-scope"


class GapTreatment(str, enum.Enum):
    OPEN = "open"
    RESOLVED = "resolved-by-decision"
    RESIDUAL = "residual"
    EXCLUDED = "excluded-from-scope"


@dataclass(frozen=True)
class EvidenceRef:
    path: str
    line_start: int | None = None
    line_end: int | None = None
    note: str | None = None

    def __post_init__(self) -> None:
        if not self.path:
            raise ClaimError("evidence path must be non-empty")
        if self.line_end is not None and self.line_start is None:
            raise ClaimError(f"evidence {self.path}: line_end without line_start")
        if self.line_start is not None and self.line_start < 1:
            raise ClaimError(f"evidence {self.path}: lines are 1-based")
        if self.line_end is not None and self.line_end < self.line_start:
            raise ClaimError(f"evidence {self.path}: line_end < line_start")

    def render(self) -> str:
        if self.line_start is None:
            return self.path
        if self.line_end is None:
            return f"{self.path}#L{self.line_start}"
        return f"{self.path}#L{self.line_start}-L{self.line_end}"


_REF = re.compile(r"(?P<path>[^\s#,|]+)(?:#L(?P<start>\d+)(?:-L(?P<end>\d+))?)?")


def parse_evidence_ref(text: str) -> EvidenceRef:
    m = _REF.fullmatch(text.strip())
    if not m:
        raise ClaimError(f"malformed evidence reference: {text!r}")
    start = int(m["start"]) if m["start"] else None
    end = int(m["end"]) if m["end"] else None
    return EvidenceRef(m["path"], start, end)


def parse_evidence_list(text: str) -> tuple[EvidenceRef, ...]:
    return tuple(parse_evidence_ref(part) for part in text.split(",") if part.strip())


@dataclass(frozen=True)
class HistoryRecord:
    prior: ClaimStatus
    status: ClaimStatus
    reason: str
    actor: str


@dataclass(frozen=True)
class Claim:
    id: str
    spec_id: str
    status: ClaimStatus
    text: str
    evidence: tuple[EvidenceRef, ...] = ()
    history: tuple[HistoryRecord, ...] = ()
    flags: tuple[str, ...] = field(default=(), compare=False)

    @property
    def initial_status(self) -> ClaimStatus:
        return self.history[0].prior if self.history else self.status

    def render(self) -> str:
        line = f"- CLAIM {self.id} [{self.status.value}] :: {self.text}"
        if self.evidence:
            line += " | evidence: " + ", ".join(ref.render() for ref in self.evidence)
        for rec in self.history:
            line += f"\n  history: {rec.prior.value} -> {rec.status.value} :: {rec.actor} :: {rec.reason}"
        return line


@dataclass(frozen=True)
class Diagnostic:
    line: int
    message: str
    code: str = "malformed"

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


_CLAIM_START = re.compile(r"^\s*-\s+CLAIM\b")
_CLAIM = re.compile(
    r"^- CLAIM (?P<id>c-\d{4}) \[(?P<status>[a-z-]+)\] :: (?P<text>.*?)(?: \| evidence: (?P<ev>.+))?$"
)
_HISTORY = re.compile(r"^\s+history: (?P<prior>[a-z]+) -> (?P<to>[a-z]+) :: (?P<actor>[^:]+?) :: (?P<reason>.+)$")
_UNIT_HEADING = re.compile(r"^#{1,6}\s+Unit:\s*(?P<unit>\S+)\s*$")

UNEVIDENCED = "confirmed claim without evidence"


def parse_claim_lines(
    document_text: str,
    spec_id: str = "project",
    diagnostics: list[Diagnostic] | None = None,
) -> list[Claim]:
    """Extract claim lines from a document.

    A heading of the form ``## Unit: <id>`` switches the owning spec for the
    claims that follow it. Malformed claim lines are reported through
    ``diagnostics`` rather than dropped silently.
    """
    if diagnostics is None:
        diagnostics = []
    claims: list[Claim] = []
    seen: set[str] = set()
    current_spec = spec_id
    last: int | None = None
    for lineno, line in enumerate(document_text.splitlines(), 1):
        heading = _UNIT_HEADING.match(line)
        if heading:
            current_spec = heading["unit"]
            last = None
            continue
        hist = _HISTORY.match(line)
        if hist and last is not None:
            try:
                rec = HistoryRecord(
                    ClaimStatus(hist["prior"]), ClaimStatus(hist["to"]), hist["reason"].strip(), hist["actor"].strip()
                )
            except ValueError:
                diagnostics.append(Diagnostic(lineno, "unknown status in history line"))
                continue
            claims[last] = replace(claims[last], history=claims[last].history + (rec,))
            continue
        if not _CLAIM_START.match(line):
            if line.strip():
                last = None
            continue
        m = _CLAIM.match(line.rstrip())
        if not m:
            diagnostics.append(Diagnostic(lineno, f"malformed claim line: {line.strip()}"))
            last = None
            continue
        try:
            status = ClaimStatus(m["status"])
        except ValueError:
            diagnostics.append(Diagnostic(lineno, f"unknown claim status {m['status']!r}"))
            last = None
            continue
        try:
            evidence = parse_evidence_list(m["ev"]) if m["ev"] else ()
        except ClaimError as exc:
            diagnostics.append(Diagnostic(lineno, str(exc)))
            last = None
            continue
        if m["id"] in seen:
            raise ClaimError(f"line {lineno}: duplicate claim id {m['id']}")
        seen.add(m["id"])
        flags: tuple[str, ...] = ()
        if status is ClaimStatus.CONFIRMED and not evidence:
            flags = (UNEVIDENCED,)
            diagnostics.append(Diagnostic(lineno, f"{m['id']}: {UNEVIDENCED}", "unevidenced"))
        claims.append(Claim(m["id"], current_spec, status, m["text"].strip(), evidence, (), flags))
        last = len(claims) - 1
    for claim in claims:
        if claim.history and claim.history[-1].status is not claim.status:
            diagnostics.append(Diagnostic(0, f"{claim.id}: history does not end at current status", "history"))
    return claims


def reclassify_claim(claim: Claim, new_status: ClaimStatus | str, reason: str, actor: str) -> Claim:
    """Return ``claim`` with a new status and one more history record.

    Raising a claim's status (gap -> inferred -> confirmed) needs a human
    actor (``human`` or ``human:<name>``); automated stages may only lower it.
    """
    new_status = ClaimStatus(new_status)
    if not reason or not reason.strip():
        raise ClaimError("reclassification needs a reason")
    if not actor or not actor.strip():
        raise ClaimError("reclassification needs an actor")
    if new_status is claim.status:
        raise ClaimError(f"{claim.id} is already {new_status.value}")
    if new_status is ClaimStatus.CONFIRMED and not claim.evidence:
        raise ClaimError(f"{claim.id}: cannot confirm a claim without evidence")
    if _RANK[new_status] > _RANK[claim.status] and not (actor == "human" or actor.startswith("human:")):
        raise ClaimError(f"{claim.id}: upgrading {claim.status.value} -> {new_status.value} requires a human actor")
    record = HistoryRecord(claim.status, new_status, reason.strip(), actor.strip())
    return replace(claim, status=new_status, history=claim.history + (record,), flags=())


def replay_status(claim: Claim) -> ClaimStatus:
    status = claim.initial_status
    for rec in claim.history:
        if rec.prior is not status:
            raise ClaimError(f"{claim.id}: broken history chain")
        status = rec.status
    return status


DEFAULT_WEIGHTS = (Fraction(1), Fraction(1, 2), Fraction(0))


def _as_fraction(value) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(str(value))


def confidence_index(
    n_confirmed: int,
    n_inferred: int,
    n_gap: int,
    weights: Sequence = DEFAULT_WEIGHTS,
) -> float:
    """Weighted share of confirmed/inferred/gap claims as a percentage.

    Defaults weigh confirmed 1.0, inferred 0.5, gap 0.0. Computed exactly and
    rounded half-up to one decimal.
    """
    for n in (n_confirmed, n_inferred, n_gap):
        if n < 0:
            raise ClaimError("claim counts must be non-negative")
    total = n_confirmed + n_inferred + n_gap
    if total == 0:
        raise ClaimError("no claims in scope")
    w_c, w_i, w_g = (_as_fraction(w) for w in weights)
    exact = 100 * (w_c * n_confirmed + w_i * n_inferred + w_g * n_gap) / total
    return float(round_half_up(exact))


def round_half_up(value: Fraction, places: int = 1) -> Decimal:
    scale = 10**places
    scaled = value * scale
    floored = scaled.numerator // scaled.denominator
    if scaled - floored >= Fraction(1, 2):
        floored += 1
    return (Decimal(floored) / scale).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class ReportRow:
    spec_id: str
    confirmed: int
    inferred: int
    gap: int
    index: float

    @property
    def total(self) -> int:
        return self.confirmed + self.inferred + self.gap


@dataclass
class ConfidenceReport:
    rows: list[ReportRow]
    total: ReportRow

    def to_dict(self) -> dict:
        def row(r: ReportRow) -> dict:
            return {
                "spec_id": r.spec_id,
                "confirmed": r.confirmed,
                "inferred": r.inferred,
                "gap": r.gap,
                "claims": r.total,
                "index": r.index,
            }

        return {"rows": [row(r) for r in self.rows], "total": row(self.total)}


def count_statuses(claims: Iterable[Claim]) -> tuple[int, int, int]:
    counts = Counter(c.status for c in claims)
    return counts[ClaimStatus.CONFIRMED], counts[ClaimStatus.INFERRED], counts[ClaimStatus.GAP]


def build_confidence_report(
    claims: Iterable[Claim],
    order: Sequence[str] | None = None,
    weights: Sequence = DEFAULT_WEIGHTS,
) -> ConfidenceReport:
    """One row per spec plus a total row.

    Rows follow ``order`` when given (specs not listed come after, sorted),
    otherwise lexicographic spec id order.
    """
    claims = list(claims)
    groups: dict[str, list[Claim]] = {}
    for c in claims:
        groups.setdefault(c.spec_id, []).append(c)
    if order:
        ranked = [s for s in order if s in groups] + sorted(s for s in groups if s not in order)
    else:
        ranked = sorted(groups)
    rows = []
    for spec in ranked:
        counts = count_statuses(groups[spec])
        rows.append(ReportRow(spec, *counts, confidence_index(*counts, weights=weights)))
    totals = count_statuses(claims)
    if sum(totals) == 0:
        raise ClaimError("no claims in scope")
    total = ReportRow("total", *totals, confidence_index(*totals, weights=weights))
    return ConfidenceReport(rows, total)


def render_confidence_table(report: ConfidenceReport) -> str:
    lines = ["| Spec | Confirmed | Inferred | Gap | Index |", "|---|---:|---:|---:|---:|"]
    for r in report.rows + [report.total]:
        name = "Active total" if r is report.total else r.spec_id
        lines.append(f"| {name} | {r.confirmed} | {r.inferred} | {r.gap} | {r.index:.1f}% |")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Gap:
    id: str
    severity: GapSeverity
    description: str
    treatment: GapTreatment = GapTreatment.OPEN
    decision_note: str | None = None

    def __post_init__(self) -> None:
        if not re.fullmatch(r"g-\d{2,}", self.id):
            raise ClaimError(f"invalid gap id {self.id!r}")
        object.__setattr__(self, "severity", GapSeverity(self.severity))
        object.__setattr__(self, "treatment", GapTreatment(self.treatment))
        if self.severity is GapSeverity.OUT_OF_SCOPE and self.treatment is not GapTreatment.EXCLUDED:
            raise ClaimError(f"{self.id}: out-of-scope gaps must be excluded-from-scope")
        if self.treatment is GapTreatment.RESOLVED and not (self.decision_note or "").strip():
            raise ClaimError(f"{self.id}: resolved gap needs a decision note")

    def render(self) -> str:
        line = f"- GAP {self.id} [{self.severity.value}] [{self.treatment.value}] :: {self.description}"
        if self.decision_note:
            line += f"\n  decision: {self.decision_note}"
        return line


_GAP = re.compile(r"^- GAP (?P<id>g-\d{2,}) \[(?P<sev>[a-z-]+)\] \[(?P<treat>[a-z-]+)\] :: (?P<desc>.+)$")
_DECISION = re.compile(r"^\s+decision:\s*(?P<note>.+)$")


def parse_gap_lines(text: str, diagnostics: list[Diagnostic] | None = None) -> list[Gap]:
    if diagnostics is None:
        diagnostics = []
    # (lineno, id, severity, treatment, description, note)
    raw: list[list] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        dec = _DECISION.match(line)
        if dec and raw and raw[-1][5] is None:
            raw[-1][5] = dec["note"].strip()
            continue
        if not re.match(r"^\s*-\s+GAP\b", line):
            continue
        m = _GAP.match(line.rstrip())
        if not m:
            diagnostics.append(Diagnostic(lineno, f"malformed gap line: {line.strip()}"))
            continue
        raw.append([lineno, m["id"], m["sev"], m["treat"], m["desc"].strip(), None])
    gaps: list[Gap] = []
    seen: set[str] = set()
    for lineno, gid, sev, treat, desc, note in raw:
        if gid in seen:
            raise ClaimError(f"line {lineno}: duplicate gap id {gid}")
        seen.add(gid)
        try:
            gaps.append(Gap(gid, GapSeverity(sev), desc, GapTreatment(treat), note))
        except (ClaimError, ValueError) as exc:
            diagnostics.append(Diagnostic(lineno, str(exc)))
    return gaps


def blocking_gaps(gaps: Iterable[Gap]) -> list[Gap]:
    """Gaps that still block a safe reimplementation: critical and unresolved."""
    return [
        g
        for g in gaps
        if g.severity is GapSeverity.CRITICAL and g.treatment in (GapTreatment.OPEN, GapTreatment.RESIDUAL)
    ]


@dataclass
class GapSummary:
    total: int
    by_severity: dict[str, int]
    by_treatment: dict[str, int]
    blocking: list[Gap]

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "by_severity": dict(self.by_severity),
            "by_treatment": dict(self.by_treatment),
            "blocking": [g.id for g in self.blocking],
        }


def summarize_gaps(gaps: Iterable[Gap]) -> GapSummary:
    gaps = list(gaps)
    sev = Counter(g.severity for g in gaps)
    treat = Counter(g.treatment for g in gaps)
    return GapSummary(
        total=len(gaps),
        by_severity={s.value: sev[s] for s in GapSeverity},
        by_treatment={t.value: treat[t] for t in GapTreatment},
        blocking=blocking_gaps(gaps),
    )
