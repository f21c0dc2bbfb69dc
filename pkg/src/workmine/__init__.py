"""workmine: induce hierarchical workflows from computer-use activity traces
and compare how different workers do the same tasks."""

__version__ = "0.1.0"

from .errors import (AnnotatorParseError, BackendError, InputError,
                     InvariantViolation, WorkmineError)
from .events import (EventKind, IngestFlag, RawEvent, ScreenshotRef, Trajectory,
                     Violation, WorkerMeta, ingest_trajectory, parse_session,
                     render_event, session_to_jsonl, validate_trajectory,
                     write_session)
from .preprocess import (PreprocessConfig, ReductionStats, detect_double_clicks,
                         merge_keypress_runs, merge_scroll_runs, preprocess)
from .frames import Frame, frame_mse, histogram_distance, load_frame
from .segmentation import (BoundaryPolicy, Segment, detect_boundaries,
                           mse_series, segment, segments_from_boundaries,
                           semantic_merge)
from .hierarchy import (HierarchyConfig, Workflow, WorkflowNode, annotate_goals,
                        build_skeleton, flatten, validate_tree,
                        workflow_from_doc, workflow_to_doc)
from .quality import (AgreementReport, QualityReport, cohens_kappa,
                      judge_consistency, judge_modularity, quality_report)
from .alignment import (AlignmentResult, MatchOverrides, StepMatch, align,
                        apply_manual_refinement, compute_metrics,
                        propose_matches, progress)
from .analytics import (CohortReport, ToolLabel, ToolRule, TrajectoryStats,
                        alignment_breakdown, efficiency_report, label_tools,
                        load_tool_rules, percent_delta, program_use_rate)
from .annotator import (Annotator, CallPolicy, LlmBackend, ResponseCache,
                        StubBackend, create_annotator)
from .pipeline import (CorpusManifest, ManifestEntry, PipelineConfig,
                       emit_report, load_manifest, run_pipeline)
