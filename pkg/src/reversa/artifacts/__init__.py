from .documents import (
    MIGRATION_DOCS,
    REGISTRY,
    ArtifactDocument,
    ArtifactError,
    ArtifactKind,
    ArtifactSchema,
    Severity,
    ValidationReport,
    Violation,
    kind_for_path,
    make_document,
    render_template,
    validate_artifact,
)
from .gherkin import FeatureSummary, parse_gherkin_summary, total_scenarios
from .matrix import (
    DeadLink,
    MatrixError,
    TraceMatrix,
    build_code_spec_matrix,
    build_spec_impact_matrix,
    detect_dead_links,
    parse_matrix,
    render_matrix,
)
from .records import Question, QuestionStatus, RecordError, Task, TaskStatus, parse_edges, parse_questions, parse_tasks

__all__ = [
    "MIGRATION_DOCS",
    "REGISTRY",
    "ArtifactDocument",
    "ArtifactError",
    "ArtifactKind",
    "ArtifactSchema",
    "DeadLink",
    "FeatureSummary",
    "MatrixError",
    "Question",
    "QuestionStatus",
    "RecordError",
    "Severity",
    "Task",
    "TaskStatus",
    "TraceMatrix",
    "ValidationReport",
    "Violation",
    "build_code_spec_matrix",
    "build_spec_impact_matrix",
    "detect_dead_links",
    "kind_for_path",
    "make_document",
    "parse_edges",
    "parse_gherkin_summary",
    "parse_matrix",
    "parse_questions",
    "parse_tasks",
    "render_matrix",
    "render_template",
    "total_scenarios",
    "validate_artifact",
]
