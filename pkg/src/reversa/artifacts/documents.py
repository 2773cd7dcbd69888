"""Artifact documents under the output root and their schema registry.

Markdown artifacts carry a ``key: value`` front matter block between ``---``
lines, then ``## `` sections. Parity features are plain Gherkin.
"""

from __future__ import annotations

import enum
import re
from collections.abc import Mapping
from dataclasses import dataclass, field

from ..claims import Claim, ClaimError, Diagnostic, parse_claim_lines, parse_gap_lines
from .gherkin import parse_gherkin_summary
from .matrix import MatrixError, parse_matrix
from .records import RecordError, parse_edges, parse_questions, parse_tasks


class ArtifactError(ValueError):
    pass


class ArtifactKind(str, enum.Enum):
    INVENTORY = "inventory"
    ANALYSIS = "analysis"
    RULES = "rules"
    ARCHITECTURE = "architecture"
    DOMAIN_MODEL = "domain-model"
    STATE_MACHINES = "state-machines"
    DEPENDENCIES = "dependencies"
    QUESTIONS = "questions"
    GAPS = "gaps"
    CONFIDENCE_REPORT = "confidence-report"
    REQUIREMENTS = "requirements"
    DESIGN = "design"
    TASKS = "tasks"
    CODE_SPEC_MATRIX = "code-spec-matrix"
    SPEC_IMPACT_MATRIX = "spec-impact-matrix"
    MIGRATION_DOC = "migration-doc"
    PARITY_FEATURE = "parity-feature"


@dataclass(frozen=True)
class ArtifactSchema:
    kind: ArtifactKind
    path: str
    required_sections: tuple[str, ...] = ()
    unit_level: bool = False
    title: str = ""

    def path_for(self, unit: str | None = None, name: str | None = None) -> str:
        if "{unit}" in self.path and not unit:
            raise ArtifactError(f"{self.kind.value} artifacts need a unit")
        if "{name}" in self.path and not name:
            raise ArtifactError(f"{self.kind.value} artifacts need a name")
        return self.path.format(unit=unit, name=name)


K = ArtifactKind
REGISTRY: dict[ArtifactKind, ArtifactSchema] = {
    s.kind: s
    for s in [
        ArtifactSchema(K.INVENTORY, "discovery/inventory.md", ("Files",), title="Inventory"),
        ArtifactSchema(K.ANALYSIS, "discovery/analysis.md", ("Modules",), title="Code analysis"),
        ArtifactSchema(K.RULES, "discovery/rules.md", ("Rules",), title="Recovered rules"),
        ArtifactSchema(K.ARCHITECTURE, "discovery/architecture.md", ("Components",), title="Architecture"),
        ArtifactSchema(K.DOMAIN_MODEL, "discovery/domain-model.md", ("Entities",), title="Domain model"),
        ArtifactSchema(K.STATE_MACHINES, "discovery/state-machines.md", ("States",), title="State machines"),
        ArtifactSchema(K.DEPENDENCIES, "discovery/dependencies.md", ("Edges",), title="Dependencies"),
        ArtifactSchema(K.QUESTIONS, "discovery/questions.md", ("Questions",), title="Questions"),
        ArtifactSchema(K.GAPS, "discovery/gaps.md", ("Gaps",), title="Gaps"),
        ArtifactSchema(
            K.CONFIDENCE_REPORT, "discovery/confidence-report.md", ("Distribution", "Register"), title="Confidence report"
        ),
        ArtifactSchema(
            K.REQUIREMENTS, "specs/{unit}/requirements.md", ("Scope", "Requirements", "Acceptance"), True, "Requirements"
        ),
        ArtifactSchema(K.DESIGN, "specs/{unit}/design.md", ("Design",), True, "Design"),
        ArtifactSchema(K.TASKS, "specs/{unit}/tasks.md", ("Tasks",), True, "Tasks"),
        ArtifactSchema(K.CODE_SPEC_MATRIX, "traceability/code-spec-matrix.md", ("Matrix",), title="Code-spec matrix"),
        ArtifactSchema(
            K.SPEC_IMPACT_MATRIX, "traceability/spec-impact-matrix.md", ("Matrix",), title="Spec-impact matrix"
        ),
        ArtifactSchema(K.MIGRATION_DOC, "migration/{name}.md", ("Summary",), title="Migration"),
        ArtifactSchema(K.PARITY_FEATURE, "migration/parity/{name}.feature", title="Parity feature"),
    ]
}

# migration documents, in the order the migration stages produce them
MIGRATION_DOCS = (
    "briefing",
    "strategy",
    "risks",
    "cutover-plan",
    "target-architecture",
    "domain-model",
    "data-model",
    "data-migration",
    "handoff",
)


def kind_for_path(path: str) -> ArtifactKind | None:
    """Infer the artifact kind from an output-root-relative path."""
    if path.endswith(".feature"):
        return K.PARITY_FEATURE
    for schema in REGISTRY.values():
        pattern = re.escape(schema.path).replace(r"\{unit\}", r"[^/]+").replace(r"\{name\}", r"[^/]+")
        if re.fullmatch(pattern, path):
            return schema.kind
    return None


@dataclass
class ArtifactDocument:
    kind: ArtifactKind
    path: str
    text: str
    front_matter: dict[str, str] = field(default_factory=dict)
    sections: list[tuple[str, str]] = field(default_factory=list)
    claims: list[Claim] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @classmethod
    def from_text(cls, path: str, text: str, kind: ArtifactKind | str | None = None) -> "ArtifactDocument":
        front, body = split_front_matter(text)
        kind_name = kind.value if isinstance(kind, ArtifactKind) else kind
        kind_name = kind_name or front.get("kind") or (kind_for_path(path).value if kind_for_path(path) else None)
        if kind_name is None:
            raise ArtifactError(f"{path}: cannot determine artifact kind")
        try:
            resolved = ArtifactKind(kind_name)
        except ValueError:
            raise ArtifactError(f"{path}: unknown artifact kind {kind_name!r}") from None
        doc = cls(resolved, path, text, front)
        if resolved is K.PARITY_FEATURE:
            return doc
        doc.sections = split_sections(body)
        try:
            doc.claims = parse_claim_lines(body, front.get("spec_id", "project"), doc.diagnostics)
        except ClaimError as exc:
            doc.diagnostics.append(Diagnostic(0, str(exc), "duplicate"))
        return doc

    @property
    def spec_id(self) -> str | None:
        return self.front_matter.get("spec_id")

    def section(self, heading: str) -> str | None:
        for h, body in self.sections:
            if h == heading:
                return body
        return None

    def data(self) -> bytes:
        return self.text.encode("utf-8")


def split_front_matter(text: str) -> tuple[dict[str, str], str]:
    lines = text.splitlines(keepends=True)
    if not lines or lines[0].rstrip("\r\n") != "---":
        return {}, text
    front: dict[str, str] = {}
    for i, line in enumerate(lines[1:], 1):
        stripped = line.rstrip("\r\n")
        if stripped == "---":
            return front, "".join(lines[i + 1 :])
        if ":" in stripped:
            key, _, value = stripped.partition(":")
            front[key.strip()] = value.strip()
    return {}, text


def render_front_matter(pairs: Mapping[str, object]) -> str:
    return "---\n" + "".join(f"{k}: {v}\n" for k, v in pairs.items()) + "---\n"


def split_sections(body: str) -> list[tuple[str, str]]:
    sections: list[tuple[str, str]] = []
    heading: str | None = None
    buf: list[str] = []
    for line in body.splitlines():
        if line.startswith("## "):
            if heading is not None:
                sections.append((heading, "\n".join(buf).strip("\n")))
            heading, buf = line[3:].strip(), []
        elif heading is not None:
            buf.append(line)
    if heading is not None:
        sections.append((heading, "\n".join(buf).strip("\n")))
    return sections


def make_document(
    kind: ArtifactKind | str,
    sections: list[tuple[str, str]],
    *,
    unit: str | None = None,
    name: str | None = None,
    generated_by: str | None = None,
    title: str | None = None,
) -> ArtifactDocument:
    """Render a markdown artifact from its parts and parse it back."""
    kind = ArtifactKind(kind)
    schema = REGISTRY[kind]
    front: dict[str, object] = {"kind": kind.value, "version": 1}
    if unit:
        front["spec_id"] = unit
    if generated_by:
        front["generated_by"] = generated_by
    heading = title or (f"{schema.title}: {unit}" if unit else schema.title)
    parts = [render_front_matter(front), f"\n# {heading}\n"]
    for h, body in sections:
        parts.append(f"\n## {h}\n\n{body.rstrip()}\n" if body.strip() else f"\n## {h}\n")
    return ArtifactDocument.from_text(schema.path_for(unit, name), "".join(parts), kind)


class Severity(str, enum.Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Violation:
    severity: Severity
    code: str
    message: str
    path: str = ""

    def __str__(self) -> str:
        return f"{self.severity.value}: {self.path}: {self.code}: {self.message}"


@dataclass
class ValidationReport:
    path: str
    violations: list[Violation] = field(default_factory=list)

    @property
    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.severity is Severity.ERROR]

    @property
    def warnings(self) -> list[Violation]:
        return [v for v in self.violations if v.severity is Severity.WARNING]

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "violations": [
                {"severity": v.severity.value, "code": v.code, "message": v.message} for v in self.violations
            ],
        }


def validate_artifact(
    doc: ArtifactDocument,
    registry: Mapping[ArtifactKind, ArtifactSchema] = REGISTRY,
    *,
    escalate_unevidenced: bool = False,
) -> ValidationReport:
    """Check a parsed document against its kind's schema. Pure."""
    schema = registry.get(doc.kind) if isinstance(doc.kind, ArtifactKind) else None
    if schema is None:
        raise ArtifactError(f"unknown artifact kind: {doc.kind!r}")
    report = ValidationReport(doc.path)
    add = report.violations.append

    def error(code: str, msg: str) -> None:
        add(Violation(Severity.ERROR, code, msg, doc.path))

    if doc.kind is K.PARITY_FEATURE:
        summary = parse_gherkin_summary(doc.text)
        for d in summary.diagnostics:
            sev = Severity.ERROR if d.code == "feature" else Severity.WARNING
            add(Violation(sev, "gherkin", str(d), doc.path))
        if summary.scenario_count == 0:
            error("gherkin", "feature has no scenarios")
        return report

    for key in ("kind", "version"):
        if key not in doc.front_matter:
            error("front-matter", f"missing front matter key: {key}")
    if doc.front_matter.get("kind") not in (None, doc.kind.value):
        error("front-matter", f"front matter kind {doc.front_matter['kind']!r} != {doc.kind.value!r}")
    if schema.unit_level and not doc.front_matter.get("spec_id"):
        error("front-matter", "missing front matter key: spec_id")

    headings = [h for h, _ in doc.sections]
    for h in sorted({h for h in headings if headings.count(h) > 1}):
        error("duplicate-heading", f"duplicate section heading: {h}")
    for required in schema.required_sections:
        if required not in headings:
            error("missing-section", f"missing section: {required}")

    for d in doc.diagnostics:
        if d.code == "unevidenced":
            sev = Severity.ERROR if escalate_unevidenced else Severity.WARNING
            add(Violation(sev, "unevidenced", str(d), doc.path))
        else:
            error("claim-grammar", str(d))

    _, body = split_front_matter(doc.text)
    try:
        if doc.kind is K.GAPS:
            diags: list[Diagnostic] = []
            parse_gap_lines(body, diags)
            for d in diags:
                error("gap-grammar", str(d))
        elif doc.kind is K.QUESTIONS:
            diags = []
            parse_questions(body, diags)
            for d in diags:
                error("question-grammar", str(d))
        elif doc.kind is K.TASKS:
            parse_tasks(body)
        elif doc.kind is K.DEPENDENCIES:
            parse_edges(body)
        elif doc.kind in (K.CODE_SPEC_MATRIX, K.SPEC_IMPACT_MATRIX) and doc.section("Matrix") is not None:
            parse_matrix(doc.section("Matrix"))
    except (ClaimError, RecordError, MatrixError) as exc:
        error("grammar", str(exc))
    return report


def render_template(kind: ArtifactKind | str) -> str:
    """Empty skeleton for a kind, installed under ``.reversa/templates/``."""
    kind = ArtifactKind(kind)
    schema = REGISTRY[kind]
    if kind is K.PARITY_FEATURE:
        return (
            "# Parity feature skeleton\n"
            "Feature: <behavior kept identical between legacy and new system>\n\n"
            "  Scenario: <observable case>\n"
            "    Given <legacy precondition>\n"
            "    When <operation>\n"
            "    Then <same observable result>\n"
        )
    front = {"kind": kind.value, "version": 1}
    if schema.unit_level:
        front["spec_id"] = "<unit>"
    out = [render_front_matter(front), f"\n# {schema.title}\n"]
    for section in schema.required_sections:
        out.append(f"\n## {section}\n")
    return "".join(out)
