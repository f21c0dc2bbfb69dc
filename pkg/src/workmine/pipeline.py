"""End-to-end runs over a corpus manifest.

Stage outputs land under a run directory keyed by the config fingerprint,
so sweeps over thresholds or levels never clobber each other, and a rerun
with the same config rewrites byte-identical artifacts. The run summary
records versions, timings, and the annotator id; timings are the one
intentionally non-reproducible record.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from . import __version__
from .alignment import align, match_doc, progress, result_from_doc
from .analytics import (TrajectoryStats, alignment_breakdown, efficiency_report,
                        load_tool_rules, uses_program)
from .annotator import Annotator, create_annotator
from .errors import InputError, WorkmineError
from .events import (ScreenshotRef, Trajectory, WorkerMeta, ingest_trajectory,
                     worker_from_doc, write_session)
from .hierarchy import (HierarchyConfig, Workflow, annotate_goals, build_skeleton,
                        workflow_from_doc, workflow_to_doc)
from .preprocess import PreprocessConfig, preprocess
from .quality import quality_report
from .segmentation import BoundaryPolicy, Segment, segment

logger = logging.getLogger(__name__)

STAGES = ("preprocess", "segment", "induce", "validate", "align", "analyze", "report")

SKILL_VOCABULARY = ("data_analysis", "engineering", "computation", "writing", "design")


# --- configuration -------------------------------------------------------------

def _unbounded(value: Any) -> float | None:
    if value is None or value == "unbounded":
        return None
    return float(value)


def _require_keys(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise InputError(f"{where}: unknown config keys {sorted(unknown)}")


def _preprocess_from_doc(doc: dict, where: str) -> PreprocessConfig:
    _require_keys(doc, {"double_click_window", "double_click_radius",
                        "keypress_gap_limit", "scroll_direction_sensitive"}, where)
    base = PreprocessConfig()
    return PreprocessConfig(
        double_click_window=float(doc.get("double_click_window",
                                          base.double_click_window)),
        double_click_radius=_unbounded(doc.get("double_click_radius",
                                               base.double_click_radius)),
        keypress_gap_limit=_unbounded(doc.get("keypress_gap_limit")),
        scroll_direction_sensitive=bool(doc.get("scroll_direction_sensitive", False)),
    )


def _preprocess_doc(cfg: PreprocessConfig) -> dict:
    return {
        "double_click_window": cfg.double_click_window,
        "double_click_radius": ("unbounded" if cfg.double_click_radius is None
                                else cfg.double_click_radius),
        "keypress_gap_limit": ("unbounded" if cfg.keypress_gap_limit is None
                               else cfg.keypress_gap_limit),
        "scroll_direction_sensitive": cfg.scroll_direction_sensitive,
    }


def _boundary_from_doc(doc: dict, where: str) -> BoundaryPolicy:
    _require_keys(doc, {"mode", "k", "threshold", "downscale", "allow_mixed_sizes"}, where)
    base = BoundaryPolicy()
    threshold = doc.get("threshold")
    return BoundaryPolicy(
        mode=str(doc.get("mode", base.mode)),
        k=float(doc.get("k", base.k)),
        threshold=None if threshold is None else float(threshold),
        downscale=int(doc.get("downscale", 1)),
        allow_mixed_sizes=bool(doc.get("allow_mixed_sizes", False)),
    )


def _boundary_doc(policy: BoundaryPolicy) -> dict:
    return {"mode": policy.mode, "k": policy.k, "threshold": policy.threshold,
            "downscale": policy.downscale, "allow_mixed_sizes": policy.allow_mixed_sizes}


def _hierarchy_from_doc(doc: dict, where: str) -> HierarchyConfig:
    _require_keys(doc, {"max_depth", "micro_step_rule", "fanout_limit"}, where)
    base = HierarchyConfig()
    return HierarchyConfig(
        max_depth=int(doc.get("max_depth", base.max_depth)),
        micro_step_rule=str(doc.get("micro_step_rule", base.micro_step_rule)),
        fanout_limit=int(doc.get("fanout_limit", base.fanout_limit)),
    )


def _hierarchy_doc(cfg: HierarchyConfig) -> dict:
    return {"max_depth": cfg.max_depth, "micro_step_rule": cfg.micro_step_rule,
            "fanout_limit": cfg.fanout_limit}


@dataclass(frozen=True)
class PipelineConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    boundary: BoundaryPolicy = field(default_factory=BoundaryPolicy)
    hierarchy: HierarchyConfig = field(default_factory=HierarchyConfig)
    judge_level: int | None = None  # None = one level below each root
    align_level: int | None = None
    state_stride: int = 10
    tool_rules_path: str | None = None
    annotator_backend: str = "stub"  # "stub" | "llm"
    llm_endpoint: str | None = None
    llm_model: str | None = None
    llm_max_edge: int = 1024
    pair_mode: str = "cross"  # "cross" (agent x human per task) | "all"
    group_by: str = "kind"
    reference_group: str = "human"
    only_shared_successes: bool = False
    # Execution details; excluded from the fingerprint because they cannot
    # change any artifact content.
    cache_dir: str | None = None

    def __post_init__(self) -> None:
        if self.pair_mode not in ("cross", "all"):
            raise InputError(f"unknown pair_mode {self.pair_mode!r}")
        if self.state_stride < 1:
            raise InputError("state_stride must be >= 1")

    def to_doc(self) -> dict:
        return {
            "preprocess": _preprocess_doc(self.preprocess),
            "boundary": _boundary_doc(self.boundary),
            "hierarchy": _hierarchy_doc(self.hierarchy),
            "judge_level": self.judge_level,
            "align_level": self.align_level,
            "state_stride": self.state_stride,
            "tool_rules_path": self.tool_rules_path,
            "annotator_backend": self.annotator_backend,
            "llm_endpoint": self.llm_endpoint,
            "llm_model": self.llm_model,
            "llm_max_edge": self.llm_max_edge,
            "pair_mode": self.pair_mode,
            "group_by": self.group_by,
            "reference_group": self.reference_group,
            "only_shared_successes": self.only_shared_successes,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_doc(cls, doc: Any, where: str = "<config>") -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise InputError(f"{where}: config must be an object")
        allowed = {"preprocess", "boundary", "hierarchy", "judge_level",
                   "align_level", "state_stride", "tool_rules_path",
                   "annotator_backend", "llm_endpoint", "llm_model",
                   "llm_max_edge", "pair_mode", "group_by", "reference_group",
                   "only_shared_successes", "cache_dir"}
        _require_keys(doc, allowed, where)
        base = cls()
        return cls(
            preprocess=_preprocess_from_doc(doc.get("preprocess", {}),
                                            f"{where}.preprocess"),
            boundary=_boundary_from_doc(doc.get("boundary", {}), f"{where}.boundary"),
            hierarchy=_hierarchy_from_doc(doc.get("hierarchy", {}),
                                          f"{where}.hierarchy"),
            judge_level=doc.get("judge_level"),
            align_level=doc.get("align_level"),
            state_stride=int(doc.get("state_stride", base.state_stride)),
            tool_rules_path=doc.get("tool_rules_path"),
            annotator_backend=str(doc.get("annotator_backend", "stub")),
            llm_endpoint=doc.get("llm_endpoint"),
            llm_model=doc.get("llm_model"),
            llm_max_edge=int(doc.get("llm_max_edge", base.llm_max_edge)),
            pair_mode=str(doc.get("pair_mode", base.pair_mode)),
            group_by=str(doc.get("group_by", base.group_by)),
            reference_group=str(doc.get("reference_group", base.reference_group)),
            only_shared_successes=bool(doc.get("only_shared_successes", False)),
            cache_dir=doc.get("cache_dir"),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: malformed config JSON: {exc.msg}") from None
        return cls.from_doc(doc, where=str(path))


def build_annotator(config: PipelineConfig) -> Annotator:
    return create_annotator(
        backend_name=config.annotator_backend,
        cache_dir=config.cache_dir,
        llm_endpoint=config.llm_endpoint,
        llm_model=config.llm_model,
        llm_max_edge=config.llm_max_edge,
    )


# --- corpus manifest -----------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    path: Path  # resolved session file location
    task_id: str
    skill: str
    worker: WorkerMeta
    instruction: str | None = None

    @property
    def label(self) -> str:
        return f"{self.task_id}/{self.worker.worker_id}"

    @property
    def artifact_name(self) -> str:
        return _safe_name(f"{self.task_id}__{self.worker.worker_id}")


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...]
    results_path: Path | None = None


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "-", name)


def load_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed manifest JSON: {exc.msg}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("trajectories"), list):
        raise InputError(f"{path}: manifest must carry a trajectories list")
    entries = []
    seen_paths: set[Path] = set()
    seen_workers: set[tuple[str, str]] = set()
    for i, item in enumerate(doc["trajectories"]):
        where = f"{path}: trajectory {i}"
        if not isinstance(item, dict):
            raise InputError(f"{where}: must be an object")
        for key in ("path", "task_id", "skill", "worker"):
            if key not in item:
                raise InputError(f"{where}: missing field {key!r}")
        session_path = (path.parent / item["path"]).resolve()
        if session_path in seen_paths:
            raise InputError(f"{where}: duplicate session path {item['path']!r}")
        seen_paths.add(session_path)
        skill = str(item["skill"])
        if skill not in SKILL_VOCABULARY:
            logger.warning("%s: skill tag %r is outside the declared vocabulary %s",
                           where, skill, SKILL_VOCABULARY)
        entry = ManifestEntry(
            path=session_path, task_id=str(item["task_id"]), skill=skill,
            worker=worker_from_doc(item["worker"], where),
            instruction=item.get("instruction"),
        )
        pair = (entry.task_id, entry.worker.worker_id)
        if pair in seen_workers:
            raise InputError(f"{where}: duplicate task/worker pair {pair}")
        seen_workers.add(pair)
        entries.append(entry)
    results_path = None
    if doc.get("results") is not None:
        results_path = (path.parent / doc["results"]).resolve()
    return CorpusManifest(entries=tuple(entries), results_path=results_path)


def load_results(path: str | Path) -> dict[tuple[str, str], dict]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read results file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed results JSON: {exc.msg}") from None
    if not isinstance(doc, list):
        raise InputError(f"{path}: results file must be a JSON list")
    out: dict[tuple[str, str], dict] = {}
    for i, item in enumerate(doc):
        if not isinstance(item, dict) or "task_id" not in item or "worker_id" not in item:
            raise InputError(f"{path}: result {i} needs task_id and worker_id")
        out[(str(item["task_id"]), str(item["worker_id"]))] = item
    return out


# --- artifact IO ----------------------------------------------------------------

def _write_json(path: Path, doc: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path, stage: str, label: str) -> Any:
    if not path.is_file():
        raise InputError(f"[{label}] missing upstream artifact {path.name}; "
                         f"run the {stage} stage first")
    return json.loads(path.read_text(encoding="utf-8"))


def _rebase_screenshots(t: Trajectory, new_root: Path) -> Trajectory:
    """Rewrite screenshot paths relative to ``new_root`` so a session copy
    written there still resolves its frames."""
    events = []
    for e in t.events:
        if e.screenshot is None:
            events.append(e)
            continue
        resolved = e.screenshot.resolve(t.root)
        rel = os.path.relpath(str(resolved), str(new_root))
        events.append(replace(e, screenshot=ScreenshotRef(path=rel,
                                                          frame_id=e.screenshot.frame_id)))
    return replace(t, events=tuple(events), root=new_root)


def _segments_doc(segments: list[Segment]) -> dict:
    return {"segments": [{"start": s.start, "end": s.end,
                          "boundary_cause": s.boundary_cause,
                          "merged_from": s.merged_from} for s in segments]}


def _segments_from_doc(doc: Any, where: str) -> list[Segment]:
    if not isinstance(doc, dict) or not isinstance(doc.get("segments"), list):
        raise InputError(f"{where}: segments document must carry a segment list")
    return [Segment(start=int(s["start"]), end=int(s["end"]),
                    boundary_cause=str(s.get("boundary_cause", "visual")),
                    merged_from=int(s.get("merged_from", 1)))
            for s in doc["segments"]]


def _quality_doc(report) -> dict:
    return {
        "level": report.level,
        "state_sample_stride": report.state_sample_stride,
        "consistency_score": report.consistency_score,
        "modularity_score": report.modularity_score,
        "per_step": [{"step": v.step_index, "consistency": v.consistency,
                      "modularity": v.modularity} for v in report.per_step],
    }


# --- the pipeline ---------------------------------------------------------------

class _StageClock:
    def __init__(self) -> None:
        self.seconds: dict[str, float] = {}
        self._lock = threading.Lock()

    def add(self, stage: str, started: float) -> None:
        elapsed = time.perf_counter() - started
        with self._lock:
            self.seconds[stage] = self.seconds.get(stage, 0.0) + elapsed


def run_pipeline(manifest: CorpusManifest, config: PipelineConfig,
                 out_dir: str | Path, stages: list[str] | None = None,
                 annotator: Annotator | None = None, jobs: int = 1) -> Path:
    """Run the requested stages over every manifest entry.

    Returns the run directory. Stages not requested must already have
    their artifacts on disk when a later stage needs them.
    """
    stage_set = list(STAGES) if stages is None else list(stages)
    unknown = [s for s in stage_set if s not in STAGES]
    if unknown:
        raise InputError(f"unknown stages {unknown}; valid stages are {list(STAGES)}")
    if not manifest.entries:
        raise InputError("manifest lists no trajectories")
    annotator = annotator or build_annotator(config)

    run_dir = Path(out_dir) / f"run-{config.fingerprint()[:12]}"
    run_dir.mkdir(parents=True, exist_ok=True)
    clock = _StageClock()

    def traj_dir(entry: ManifestEntry) -> Path:
        return run_dir / "trajectories" / entry.artifact_name

    def load_processed(entry: ManifestEntry) -> Trajectory:
        path = traj_dir(entry) / "session.jsonl"
        if not path.is_file():
            raise InputError(f"[{entry.label}] missing upstream artifact "
                             f"session.jsonl; run the preprocess stage first")
        t = ingest_trajectory(path)
        return replace(t, worker=entry.worker)

    def load_workflow(entry: ManifestEntry) -> Workflow:
        doc = _read_json(traj_dir(entry) / "workflow.json", "induce", entry.label)
        return workflow_from_doc(doc, where=str(traj_dir(entry) / "workflow.json"))

    def process_entry(entry: ManifestEntry) -> None:
        tdir = traj_dir(entry)
        processed: Trajectory | None = None
        segments: list[Segment] | None = None
        workflow: Workflow | None = None
        try:
            if "preprocess" in stage_set:
                started = time.perf_counter()
                raw = ingest_trajectory(entry.path)
                # The manifest's worker record is authoritative: it carries
                # curated labels (ai_usage, cost) the recorder cannot know.
                raw = replace(raw, worker=entry.worker)
                processed, stats = preprocess(raw, config.preprocess)
                processed = _rebase_screenshots(processed, tdir)
                write_session(processed, tdir / "session.jsonl")
                _write_json(tdir / "preprocess.json", {
                    "events_before": stats.events_before,
                    "events_after": stats.events_after,
                    "reduction_fraction": stats.reduction_fraction,
                })
                clock.add("preprocess", started)
            if "segment" in stage_set:
                started = time.perf_counter()
                processed = processed or load_processed(entry)
                segments = segment(processed, config.boundary, annotator)
                _write_json(tdir / "segments.json", _segments_doc(segments))
                clock.add("segment", started)
            if "induce" in stage_set:
                started = time.perf_counter()
                processed = processed or load_processed(entry)
                if segments is None:
                    segments = _segments_from_doc(
                        _read_json(tdir / "segments.json", "segment", entry.label),
                        str(tdir / "segments.json"))
                skeleton = build_skeleton(processed, segments, config.hierarchy)
                workflow = annotate_goals(skeleton, processed, annotator,
                                          task_instruction=entry.instruction,
                                          config_fingerprint=config.fingerprint())
                _write_json(tdir / "workflow.json", workflow_to_doc(workflow))
                clock.add("induce", started)
            if "validate" in stage_set:
                started = time.perf_counter()
                processed = processed or load_processed(entry)
                workflow = workflow or load_workflow(entry)
                report = quality_report(workflow, processed, annotator,
                                        level=config.judge_level,
                                        stride=config.state_stride)
                _write_json(tdir / "quality.json", _quality_doc(report))
                clock.add("validate", started)
        except WorkmineError as exc:
            if str(exc).startswith(f"[{entry.label}]"):
                raise
            raise type(exc)(f"[{entry.label}] {exc}") from exc

    per_traj = [s for s in stage_set if s in ("preprocess", "segment", "induce", "validate")]
    if per_traj:
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(process_entry, e) for e in manifest.entries]
                for future in futures:
                    future.result()
        else:
            for entry in manifest.entries:
                process_entry(entry)

    cohort_dir = run_dir / "cohort"

    if "align" in stage_set:
        started = time.perf_counter()
        rows = []
        tasks = sorted({e.task_id for e in manifest.entries})
        for task in tasks:
            group = sorted((e for e in manifest.entries if e.task_id == task),
                           key=lambda e: e.worker.worker_id)
            if config.pair_mode == "cross":
                pairs = [(a, h) for a in group if a.worker.kind == "agent"
                         for h in group if h.worker.kind == "human"]
            else:
                pairs = [(a, b) for i, a in enumerate(group)
                         for b in group[i + 1:]]
            for entry_a, entry_b in pairs:
                wf_a, wf_b = load_workflow(entry_a), load_workflow(entry_b)
                result = align(wf_a, wf_b, annotator, level=config.align_level)
                row: dict[str, Any] = {
                    "task_id": task,
                    "worker_a": entry_a.worker.worker_id,
                    "worker_b": entry_b.worker.worker_id,
                    "kind_a": entry_a.worker.kind,
                    "kind_b": entry_b.worker.kind,
                    "level": result.level,
                    "matching_percent": result.matching_percent,
                    "order_percent": result.order_percent,
                    "matches": [match_doc(m) for m in result.matches],
                }
                if entry_a.worker.kind == "agent" and entry_b.worker.kind == "human":
                    row["progress_percent"] = progress(wf_a, wf_b,
                                                       list(result.matches),
                                                       result.level)
                rows.append(row)
        _write_json(cohort_dir / "alignment.json",
                    {"pair_mode": config.pair_mode, "rows": rows})
        clock.add("align", started)

    if "analyze" in stage_set:
        started = time.perf_counter()
        results = load_results(manifest.results_path) if manifest.results_path else {}
        rules = load_tool_rules(config.tool_rules_path)
        stats = []
        for entry in manifest.entries:
            processed = load_processed(entry)
            workflow = load_workflow(entry)
            outcome = results.get((entry.task_id, entry.worker.worker_id), {})
            cost = outcome.get("cost_usd", entry.worker.cost_usd)
            stats.append(TrajectoryStats(
                task_id=entry.task_id,
                worker_id=entry.worker.worker_id,
                kind=entry.worker.kind,
                framework=entry.worker.framework,
                ai_usage=entry.worker.ai_usage,
                skill=entry.skill,
                actions=len(processed.events),
                elapsed_seconds=processed.elapsed_seconds,
                cost_usd=None if cost is None else float(cost),
                success=outcome.get("success"),
                uses_program=uses_program(workflow, processed, rules,
                                          config.judge_level),
            ))
        report = efficiency_report(stats, group_by=config.group_by,
                                   reference=config.reference_group,
                                   only_shared_successes=config.only_shared_successes)
        align_doc = _read_json(cohort_dir / "alignment.json", "align", "cohort")
        breakdown_rows = [((row["kind_a"], row["kind_b"]),
                           result_from_doc(row, "alignment"))
                          for row in align_doc["rows"]]
        breakdown = alignment_breakdown(breakdown_rows)
        _write_json(cohort_dir / "analytics.json", {
            "group_by": report.group_by,
            "reference": report.reference,
            "shared_success_filter": report.shared_success_filter,
            "groups": [{
                "group": r.group, "n": r.n,
                "mean_actions": r.mean_actions,
                "mean_elapsed_seconds": r.mean_elapsed_seconds,
                "mean_cost_usd": r.mean_cost_usd,
                "success_rate": r.success_rate,
                "program_use_rate": r.program_use_rate,
            } for r in report.rows],
            "deltas": report.deltas,
            "alignment_breakdown": [{
                "groups": list(key), "n": row.n,
                "mean_matching_percent": row.mean_matching_percent,
                "mean_order_percent": row.mean_order_percent,
            } for key, row in breakdown.items()],
            "per_trajectory": [{
                "task_id": s.task_id, "worker_id": s.worker_id, "kind": s.kind,
                "skill": s.skill, "ai_usage": s.ai_usage,
                "actions": s.actions, "elapsed_seconds": s.elapsed_seconds,
                "cost_usd": s.cost_usd, "success": s.success,
                "uses_program": s.uses_program,
            } for s in stats],
        })
        clock.add("analyze", started)

    if "report" in stage_set:
        started = time.perf_counter()
        emit_report(run_dir)
        clock.add("report", started)

    _write_json(run_dir / "run_summary.json", {
        "package_version": __version__,
        "config": config.to_doc(),
        "config_fingerprint": config.fingerprint(),
        "annotator_id": annotator.id,
        "stages": stage_set,
        "trajectories": [e.artifact_name for e in manifest.entries],
        "timings_seconds": {k: round(v, 4) for k, v in sorted(clock.seconds.items())},
    })
    return run_dir


# --- report emission ------------------------------------------------------------

_GROUP_COLUMNS = ("group", "n", "mean_actions", "mean_elapsed_seconds",
                  "mean_cost_usd", "success_rate", "program_use_rate",
                  "time_saved_percent", "actions_saved_percent",
                  "cost_saved_percent")
_ALIGN_COLUMNS = ("task_id", "worker_a", "worker_b", "kind_a", "kind_b",
                  "level", "matching_percent", "order_percent", "progress_percent")


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k))
                             for k in columns})


def emit_report(run_dir: str | Path,
                formats: tuple[str, ...] = ("tables", "plotdata")) -> Path:
    """Flat tables and plot-ready series from a run's cohort artifacts."""
    run_dir = Path(run_dir)
    report_dir = run_dir / "report"
    analytics = _read_json(run_dir / "cohort" / "analytics.json", "analyze", "report")
    alignment = _read_json(run_dir / "cohort" / "alignment.json", "align", "report")

    if "tables" in formats:
        group_rows = []
        for row in analytics["groups"]:
            deltas = analytics["deltas"].get(row["group"], {})
            group_rows.append(row | deltas)
        _write_csv(report_dir / "groups.csv", _GROUP_COLUMNS, group_rows)
        _write_csv(report_dir / "alignment_matrix.csv", _ALIGN_COLUMNS,
                   alignment["rows"])

    if "plotdata" in formats:
        per_task: dict[str, dict[str, dict[str, Any]]] = {
            "elapsed_seconds": {}, "actions": {}, "cost_usd": {}}
        for row in analytics["per_trajectory"]:
            for metric in per_task:
                per_task[metric].setdefault(row["task_id"], {})[row["worker_id"]] = row[metric]
        _write_json(report_dir / "series.json", {
            "per_task": per_task,
            "alignment_rows": [{k: row.get(k) for k in _ALIGN_COLUMNS}
                               for row in alignment["rows"]],
            "alignment_breakdown": analytics["alignment_breakdown"],
        })
    return report_dir
