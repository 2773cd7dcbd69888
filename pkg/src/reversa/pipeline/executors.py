"""Executors turn a task bundle into artifact documents.

``MockExecutor`` derives everything mechanically from the bundle, so a run
over the same repository is byte-for-byte reproducible. ``ExternalCommandExecutor``
hands the bundle to any program that honours the file-based contract.
"""

from __future__ import annotations

import os
import re
import subprocess
import tempfile
from collections.abc import Callable, Sequence
from dataclasses import replace
from pathlib import Path
from typing import Protocol

from .._fs import iter_files
from ..artifacts import (
    ArtifactDocument,
    ArtifactError,
    ArtifactKind,
    build_spec_impact_matrix,
    make_document,
    parse_edges,
    parse_gherkin_summary,
    parse_questions,
    render_matrix,
)
from ..claims import Claim, ClaimStatus, EvidenceRef, blocking_gaps, count_statuses, confidence_index, parse_gap_lines
from ..artifacts.documents import split_front_matter
from .bundle import EvidenceFile, TaskBundle
from .review import review_documents, review_stage

K = ArtifactKind
MARKER = "??"
BUNDLE_ENV = "REVERSA_BUNDLE"
OUTPUT_ENV = "REVERSA_OUTPUT_DIR"


class ExecutorError(RuntimeError):
    pass


class Executor(Protocol):
    identity: str

    def execute(self, bundle: TaskBundle) -> list[ArtifactDocument]: ...


# --- mock --------------------------------------------------------------------


def _ref(f: EvidenceFile, start: int | None = None, end: int | None = None) -> EvidenceRef:
    if start is None and f.lines:
        start, end = 1, f.lines
    return EvidenceRef(f.path, start, end if end != start else None)


def _claim_line(num: int, status: ClaimStatus, text: str, refs: Sequence[EvidenceRef]) -> str:
    return Claim(f"c-{num:04d}", "", status, text, tuple(refs)).render()


def _prior_claims(bundle: TaskBundle, kinds: Sequence[ArtifactKind]) -> list[Claim]:
    out = []
    for kind in kinds:
        for path, text in sorted(bundle.prior(kind).items()):
            out.extend(ArtifactDocument.from_text(path, text).claims)
    return out


def _next_claim(bundle: TaskBundle) -> int:
    """First free claim number, ignoring this stage's own earlier outputs."""
    own = {p for _, p in bundle.expected_outputs}
    nums = [0]
    for path, text in bundle.prior_artifacts.items():
        if path in own or path.endswith(".feature"):
            continue
        nums += [int(c.id[2:]) for c in ArtifactDocument.from_text(path, text).claims]
    return max(nums) + 1


def _units_of(bundle: TaskBundle) -> dict[str, list[EvidenceFile]]:
    by_path = {e.path: e for e in bundle.evidence}
    return {u: [by_path[p] for p in fs if p in by_path] for u, fs in sorted(bundle.units.items())}


def _scout(b: TaskBundle) -> list[ArtifactDocument]:
    rows = ["| path | bytes | lines | sha256 |", "|---|---:|---:|---|"]
    rows += [f"| {e.path} | {e.bytes} | {e.lines} | {e.sha256} |" for e in b.evidence]
    exts: dict[str, int] = {}
    for e in b.evidence:
        ext = e.path.rsplit(".", 1)[-1].lower() if "." in e.path.rsplit("/", 1)[-1] else "(none)"
        exts[ext] = exts.get(ext, 0) + 1
    stack = "\n".join(f"- {ext}: {n} file(s)" for ext, n in sorted(exts.items()))
    return [make_document(K.INVENTORY, [("Files", "\n".join(rows)), ("Stack", stack or "None.")], generated_by="mock")]


_CALL = re.compile(r"""\bCALL\s+['"]([\w-]+)['"]""", re.IGNORECASE)
_INCLUDE = re.compile(r"""#include\s*[<"]([^>"]+)[>"]""")


def _archaeologist(b: TaskBundle) -> list[ArtifactDocument]:
    blocks = []
    for e in b.evidence:
        lines = [f"### {e.path}", "", f"- lines: {e.lines}"]
        if e.content is None:
            lines.append("- content: over byte budget, not analysed")
        else:
            calls = sorted(set(_CALL.findall(e.content)))
            includes = sorted(set(_INCLUDE.findall(e.content)))
            lines.append(f"- calls: {', '.join(calls) or 'none'}")
            lines.append(f"- includes: {', '.join(includes) or 'none'}")
            lines.append(f"- open markers: {e.content.count(MARKER)}")
        blocks.append("\n".join(lines))
    return [make_document(K.ANALYSIS, [("Modules", "\n\n".join(blocks) or "None.")], generated_by="mock")]


def _detective(b: TaskBundle) -> list[ArtifactDocument]:
    num = _next_claim(b)
    blocks = []
    for unit, files in _units_of(b).items():
        lines = []
        for f in files:
            for lineno, text in enumerate((f.content or "").splitlines(), 1):
                if MARKER not in text:
                    continue
                ref = EvidenceRef(f.path, lineno)
                lines.append(
                    _claim_line(num, ClaimStatus.INFERRED, f"{f.path} line {lineno}: behavior near the marker is read from context", [ref])
                )
                lines.append(
                    _claim_line(num + 1, ClaimStatus.GAP, f"{f.path} line {lineno}: intent behind the marker is unknown", [ref])
                )
                num += 2
        if lines:
            blocks.append(f"### Unit: {unit}\n\n" + "\n".join(lines))
    return [make_document(K.RULES, [("Rules", "\n\n".join(blocks) or "No rules recovered.")], generated_by="mock")]


def dependency_edges(bundle: TaskBundle) -> list[tuple[str, str]]:
    """Unit A depends on unit B when a file of A names B as a whole word."""
    units = _units_of(bundle)
    edges = set()
    for a, files in units.items():
        text = "\n".join(f.content or "" for f in files).upper()
        for b in units:
            if b != a and re.search(rf"(?<![\w-]){re.escape(b.upper())}(?![\w-])", text):
                edges.add((a, b))
    return sorted(edges)


def _architect(b: TaskBundle) -> list[ArtifactDocument]:
    units = _units_of(b)
    edges = dependency_edges(b)
    components = "\n".join(f"- {u}: {', '.join(f.path for f in fs) or 'no files'}" for u, fs in units.items())
    integrations = "\n".join(f"- {a} calls {c}" for a, c in edges)
    entities = "\n".join(f"- {u.capitalize()}: data owned by unit {u}" for u in units)
    states = "\n".join(f"- {u}: idle -> processing -> idle" for u in units)
    dep_lines = [f"- NODE {u}" for u in units] + [f"- EDGE {a} -> {c}" for a, c in edges]
    impact = build_spec_impact_matrix(units, units, [(u, u) for u in units] + edges)
    return [
        make_document(K.ARCHITECTURE, [("Components", components or "None."), ("Integrations", integrations or "None.")], generated_by="mock"),
        make_document(K.DOMAIN_MODEL, [("Entities", entities or "None.")], generated_by="mock"),
        make_document(K.STATE_MACHINES, [("States", states or "None.")], generated_by="mock"),
        make_document(K.DEPENDENCIES, [("Edges", "\n".join(dep_lines) or "None.")], generated_by="mock"),
        make_document(K.SPEC_IMPACT_MATRIX, [("Matrix", render_matrix(impact))], generated_by="mock"),
    ]


def _writer(b: TaskBundle) -> list[ArtifactDocument]:
    unit = b.unit or "project"
    num = _next_claim(b)
    scope = "\n".join(f"- {e.path} ({e.lines} lines)" for e in b.evidence)
    reqs = []
    tasks = []
    for i, e in enumerate(b.evidence):
        ref = _ref(e)
        reqs.append(_claim_line(num + i, ClaimStatus.CONFIRMED, f"Unit {unit} behavior implemented in {e.path}", [ref]))
        tasks.append(f"- TASK t-{i + 1:02d} [pending] :: Reimplement {e.path} | evidence: {ref.render()}")
    acceptance = "- Every requirement holds when checked against its cited lines."
    design = f"Unit {unit} is built from {len(b.evidence)} source file(s); see Scope in the requirements."
    return [
        make_document(
            K.REQUIREMENTS,
            [("Scope", scope or "No files."), ("Requirements", "\n".join(reqs) or "None."), ("Acceptance", acceptance)],
            unit=unit,
            generated_by="mock",
        ),
        make_document(K.DESIGN, [("Design", design)], unit=unit, generated_by="mock"),
        make_document(K.TASKS, [("Tasks", "\n".join(tasks) or "None.")], unit=unit, generated_by="mock"),
    ]


def _reviewer(b: TaskBundle) -> list[ArtifactDocument]:
    claims = _prior_claims(b, (K.RULES, K.REQUIREMENTS))
    questions = [q for text in b.prior(K.QUESTIONS).values() for q in parse_questions(split_front_matter(text)[1])]
    gaps = [g for text in b.prior(K.GAPS).values() for g in parse_gap_lines(split_front_matter(text)[1])]
    result = review_stage(
        claims,
        b.repository_files,
        questions=questions,
        gaps=gaps,
        inventory=[e.path for e in b.evidence],
    )
    return review_documents(result, "mock")


# migration and code-forward roles summarize what discovery left behind


def _discovery_claims(b: TaskBundle) -> list[Claim]:
    reports = b.prior(K.CONFIDENCE_REPORT)
    if reports:
        return _prior_claims(b, (K.CONFIDENCE_REPORT,))
    return _prior_claims(b, (K.RULES, K.REQUIREMENTS))


def _gaps(b: TaskBundle):
    return [g for text in b.prior(K.GAPS).values() for g in parse_gap_lines(split_front_matter(text)[1])]


def _mdoc(name: str, summary: str, extra: Sequence[tuple[str, str]] = ()) -> ArtifactDocument:
    return make_document(K.MIGRATION_DOC, [("Summary", summary), *extra], name=name, title=name.replace("-", " ").capitalize(), generated_by="mock")


def _spec_units(b: TaskBundle) -> list[str]:
    return sorted({ArtifactDocument.from_text(p, t).spec_id or "" for p, t in b.prior(K.REQUIREMENTS).items()} - {"", "forward"})


def _briefer(b: TaskBundle) -> list[ArtifactDocument]:
    claims = _discovery_claims(b)
    c, i, g = count_statuses(claims)
    index = f"{confidence_index(c, i, g):.1f}%" if claims else "n/a"
    summary = f"- units: {', '.join(_spec_units(b)) or 'none'}\n- claims: {len(claims)} ({c} confirmed, {i} inferred, {g} gap)\n- confidence index: {index}"
    return [_mdoc("briefing", summary)]


def _strategist(b: TaskBundle) -> list[ArtifactDocument]:
    gaps = _gaps(b)
    risks = "\n".join(f"- {g.id} [{g.severity.value}] {g.description}" for g in gaps) or "- none registered"
    blocking = blocking_gaps(gaps)
    cutover = "Run legacy and new systems in parallel until every parity scenario passes, then switch over."
    if blocking:
        cutover += " Blocked by: " + ", ".join(g.id for g in blocking) + "."
    return [
        _mdoc("strategy", "Rewrite unit by unit, keeping observable behavior identical."),
        _mdoc("risks", f"{len(gaps)} registered gap(s).", [("Risks", risks)]),
        _mdoc("cutover-plan", cutover),
    ]


def _migration_architect(b: TaskBundle) -> list[ArtifactDocument]:
    units = _spec_units(b)
    listing = "\n".join(f"- {u}" for u in units) or "- none"
    return [
        _mdoc("target-architecture", "One target module per legacy unit.", [("Modules", listing)]),
        _mdoc("domain-model", "Entities carried over from discovery.", [("Entities", listing)]),
        _mdoc("data-model", "Record layouts map to target types one to one."),
        _mdoc("data-migration", "Export legacy records, transform, load, then reconcile counts."),
    ]


def _parity(b: TaskBundle) -> list[ArtifactDocument]:
    claims = [c for c in _discovery_claims(b) if c.status is not ClaimStatus.GAP]
    by_unit: dict[str, list[Claim]] = {}
    for c in claims:
        by_unit.setdefault(c.spec_id, []).append(c)
    docs = []
    for unit in sorted(by_unit):
        lines = [f"Feature: {unit} parity", ""]
        for c in by_unit[unit]:
            lines += [
                f"  Scenario: {c.id} holds on both systems",
                f"    Given the legacy behavior described by {c.id}",
                "    When the same input is applied to the new system",
                "    Then the observable output is identical",
                "",
            ]
        text = "\n".join(lines).rstrip() + "\n"
        docs.append(ArtifactDocument.from_text(f"migration/parity/{unit}.feature", text, K.PARITY_FEATURE))
    if not docs:
        text = "Feature: project parity\n\n  Scenario: the system starts\n    Given the legacy system\n    When it starts\n    Then the new system starts too\n"
        docs.append(ArtifactDocument.from_text("migration/parity/project.feature", text, K.PARITY_FEATURE))
    return docs


def _handoff(b: TaskBundle) -> list[ArtifactDocument]:
    features = b.prior(K.PARITY_FEATURE)
    scenarios = sum(parse_gherkin_summary(t).scenario_count for t in features.values())
    blocking = blocking_gaps(_gaps(b))
    summary = f"- parity features: {len(features)}\n- parity scenarios: {scenarios}\n- blocking gaps: {len(blocking)}"
    return [_mdoc("handoff", summary)]


def _intake(b: TaskBundle) -> list[ArtifactDocument]:
    intent = b.intent.strip() or "no change intent configured"
    num = _next_claim(b)
    req = _claim_line(num, ClaimStatus.INFERRED, f"Change request: {intent}", [])
    return [
        make_document(
            K.REQUIREMENTS,
            [("Scope", intent), ("Requirements", req), ("Acceptance", "- Existing parity scenarios keep passing.")],
            unit="forward",
            generated_by="mock",
        )
    ]


def _planner(b: TaskBundle) -> list[ArtifactDocument]:
    intent = b.intent.strip() or "no change intent configured"
    return [
        make_document(K.DESIGN, [("Design", f"Apply the change: {intent}")], unit="forward", generated_by="mock"),
        make_document(K.TASKS, [("Tasks", f"- TASK t-01 [pending] :: Implement: {intent}")], unit="forward", generated_by="mock"),
    ]


def _auditor(b: TaskBundle) -> list[ArtifactDocument]:
    nodes: list[str] = []
    for text in b.prior(K.DEPENDENCIES).values():
        nodes += parse_edges(split_front_matter(text)[1])[0]
    words = set(re.findall(r"[\w-]+", b.intent.lower()))
    edges = [("forward", n) for n in sorted(set(nodes)) if n.lower() in words]
    matrix = build_spec_impact_matrix(["forward"], nodes, edges)
    doc = make_document(K.SPEC_IMPACT_MATRIX, [("Matrix", render_matrix(matrix))], title="Change impact", generated_by="mock")
    return [replace(doc, path=b.expected_outputs[0][1])]


_ROLES: dict[str, Callable[[TaskBundle], list[ArtifactDocument]]] = {
    "scout": _scout,
    "archaeologist": _archaeologist,
    "detective": _detective,
    "architect": _architect,
    "writer": _writer,
    "reviewer": _reviewer,
    "migration-briefer": _briefer,
    "migration-strategist": _strategist,
    "migration-architect": _migration_architect,
    "migration-parity": _parity,
    "migration-handoff": _handoff,
    "forward-intake": _intake,
    "forward-planner": _planner,
    "forward-auditor": _auditor,
}


class MockExecutor:
    """Deterministic stand-in for an agent; outputs depend on the bundle only."""

    identity = "mock"

    def execute(self, bundle: TaskBundle) -> list[ArtifactDocument]:
        try:
            role = _ROLES[bundle.role]
        except KeyError:
            raise ExecutorError(f"mock executor has no role {bundle.role!r}") from None
        return role(bundle)


def mock_execute(bundle: TaskBundle) -> list[ArtifactDocument]:
    return MockExecutor().execute(bundle)


# --- external command --------------------------------------------------------


class ExternalCommandExecutor:
    """Run a program per stage.

    The bundle is written to ``bundle.json``; its path is passed as the last
    argument and in ``REVERSA_BUNDLE``. The program writes artifacts under
    ``REVERSA_OUTPUT_DIR`` using output-root-relative paths and exits 0.
    """

    def __init__(self, command: Sequence[str], *, timeout: float | None = None, cwd: Path | None = None):
        if not command:
            raise ExecutorError("external executor needs a command")
        self.command = list(command)
        self.timeout = timeout
        self.cwd = cwd
        self.identity = f"external:{Path(self.command[0]).name}"

    def execute(self, bundle: TaskBundle) -> list[ArtifactDocument]:
        timeout = self.timeout if self.timeout is not None else bundle.timeout_seconds
        with tempfile.TemporaryDirectory(prefix="reversa-") as tmp:
            bundle_path = Path(tmp) / "bundle.json"
            out_dir = Path(tmp) / "out"
            out_dir.mkdir()
            bundle_path.write_bytes(bundle.to_json())
            env = dict(os.environ, **{BUNDLE_ENV: str(bundle_path), OUTPUT_ENV: str(out_dir)})
            try:
                proc = subprocess.run(
                    [*self.command, str(bundle_path)],
                    env=env,
                    cwd=self.cwd,
                    capture_output=True,
                    timeout=timeout,
                    check=False,
                )
            except subprocess.TimeoutExpired:
                raise ExecutorError(f"executor timed out after {timeout:g}s") from None
            except OSError as exc:
                raise ExecutorError(f"cannot start executor: {exc}") from None
            if proc.returncode != 0:
                tail = proc.stderr.decode("utf-8", "replace").strip().splitlines()[-1:] or [""]
                raise ExecutorError(f"executor exited with status {proc.returncode}: {tail[0]}".rstrip(": "))
            docs = []
            for rel in iter_files(out_dir):
                text = (out_dir / rel).read_text(encoding="utf-8")
                try:
                    docs.append(ArtifactDocument.from_text(rel, text))
                except ArtifactError as exc:
                    raise ExecutorError(str(exc)) from None
            return docs
