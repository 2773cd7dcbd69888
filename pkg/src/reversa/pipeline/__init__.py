from .bundle import EvidenceFile, TaskBundle, build_bundle, repository_files
from .executors import Executor, ExecutorError, ExternalCommandExecutor, MockExecutor, mock_execute
from .review import Reclassification, ReviewResult, review_documents, review_stage
from .runner import PipelineError, PlanDriftError, align_state, execute_stage, run_pipeline, run_team
from .stages import OutputSlot, PlanError, StageSpec, check_plan, plan_stages, render_plan
from .state import PipelineState, StageRecord, StageStatus, StateError, load_state, replay_log, save_state

__all__ = [
    "EvidenceFile",
    "Executor",
    "ExecutorError",
    "ExternalCommandExecutor",
    "MockExecutor",
    "OutputSlot",
    "PipelineError",
    "PipelineState",
    "PlanDriftError",
    "PlanError",
    "Reclassification",
    "ReviewResult",
    "StageRecord",
    "StageSpec",
    "StageStatus",
    "StateError",
    "TaskBundle",
    "align_state",
    "build_bundle",
    "check_plan",
    "execute_stage",
    "load_state",
    "mock_execute",
    "plan_stages",
    "render_plan",
    "repository_files",
    "replay_log",
    "review_documents",
    "review_stage",
    "run_pipeline",
    "run_team",
]
