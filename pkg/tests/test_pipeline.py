import hashlib
import json
from pathlib import Path

import pytest

from workmine.annotator import Annotator, ResponseCache, cache_key
from workmine.errors import InputError
from workmine.events import ingest_trajectory
from workmine.pipeline import (CorpusManifest, PipelineConfig, emit_report,
                               load_manifest, load_results, run_pipeline)
from workmine.synth import build_corpus


@pytest.fixture(scope="module")
def corpus(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("corpus")
    return build_corpus(root, seed=7)


def digest_tree(root: Path, skip: tuple[str, ...] = ("run_summary.json",)) -> dict:
    out = {}
    for p in sorted(Path(root).rglob("*")):
        if p.is_file() and p.name not in skip:
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


class TestManifest:
    def test_load_and_validate(self, corpus):
        manifest = load_manifest(corpus)
        assert len(manifest.entries) == 6
        kinds = {e.worker.kind for e in manifest.entries}
        assert kinds == {"human", "agent"}
        assert manifest.results_path is not None
        results = load_results(manifest.results_path)
        assert results[("stock-analysis-slides", "agent-oh")]["success"] is False

    def test_duplicate_paths_rejected(self, tmp_path, corpus):
        doc = json.loads(Path(corpus).read_text())
        doc["trajectories"].append(doc["trajectories"][0])
        bad = tmp_path / "manifest.json"
        bad.write_text(json.dumps(doc))
        # session paths resolve relative to the manifest, so keep them valid
        for entry in doc["trajectories"]:
            entry["path"] = str(Path(corpus).parent / entry["path"])
        bad.write_text(json.dumps(doc))
        with pytest.raises(InputError, match="duplicate"):
            load_manifest(bad)

    def test_duplicate_task_worker_pair_rejected(self, tmp_path, corpus):
        doc = json.loads(Path(corpus).read_text())
        base = Path(corpus).parent
        first = dict(doc["trajectories"][0])
        second = dict(first)
        second["path"] = str(base / doc["trajectories"][1]["path"])
        first["path"] = str(base / first["path"])
        bad = tmp_path / "manifest.json"
        bad.write_text(json.dumps({"trajectories": [first, second]}))
        with pytest.raises(InputError, match="duplicate task/worker"):
            load_manifest(bad)

    def test_free_text_skill_warns_but_loads(self, tmp_path, corpus, caplog):
        doc = json.loads(Path(corpus).read_text())
        doc["trajectories"] = doc["trajectories"][:1]
        doc["trajectories"][0]["path"] = str(Path(corpus).parent
                                             / doc["trajectories"][0]["path"])
        doc["trajectories"][0]["skill"] = "interpretive dance"
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(doc))
        with caplog.at_level("WARNING"):
            manifest = load_manifest(path)
        assert manifest.entries[0].skill == "interpretive dance"
        assert "vocabulary" in caplog.text


class TestConfig:
    def test_doc_round_trip_and_fingerprint(self):
        cfg = PipelineConfig()
        again = PipelineConfig.from_doc(cfg.to_doc())
        assert again.fingerprint() == cfg.fingerprint()

    def test_fingerprint_tracks_analysis_settings_only(self):
        base = PipelineConfig()
        tweaked = PipelineConfig.from_doc(base.to_doc() | {"align_level": 1})
        assert tweaked.fingerprint() != base.fingerprint()
        cached = PipelineConfig.from_doc(base.to_doc() | {"cache_dir": "/tmp/x"})
        assert cached.fingerprint() == base.fingerprint()

    def test_unknown_keys_rejected(self):
        with pytest.raises(InputError, match="unknown config keys"):
            PipelineConfig.from_doc({"tresholde": 3})

    def test_config_file_loading(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({
            "boundary": {"mode": "absolute", "threshold": 0.4},
            "preprocess": {"double_click_radius": "unbounded"},
        }))
        cfg = PipelineConfig.from_file(path)
        assert cfg.boundary.threshold == 0.4
        assert cfg.preprocess.double_click_radius is None


@pytest.fixture(scope="module")
def run_dir(corpus, tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("run")
    manifest = load_manifest(corpus)
    return run_pipeline(manifest, PipelineConfig(), out)


class TestFullRun:
    def test_per_trajectory_artifacts_exist_and_are_schema_valid(self, run_dir):
        traj_dirs = sorted((run_dir / "trajectories").iterdir())
        assert len(traj_dirs) == 6
        for tdir in traj_dirs:
            session = ingest_trajectory(tdir / "session.jsonl")
            assert session.flags == ()  # rebased frame paths resolve

            stats = json.loads((tdir / "preprocess.json").read_text())
            assert set(stats) == {"events_before", "events_after", "reduction_fraction"}
            assert stats["events_after"] == len(session.events)

            segments = json.loads((tdir / "segments.json").read_text())["segments"]
            assert segments[0]["start"] == 0
            assert segments[-1]["end"] == len(session.events)
            for left, right in zip(segments, segments[1:]):
                assert left["end"] == right["start"]

            workflow = json.loads((tdir / "workflow.json").read_text())
            assert set(workflow) == {"trajectory_ref", "config_fingerprint",
                                     "annotator_id", "root"}
            assert workflow["root"]["span"] == [0, len(session.events)]
            assert workflow["root"]["goal"]  # instruction or summary

            quality = json.loads((tdir / "quality.json").read_text())
            assert 0.0 <= quality["consistency_score"] <= 1.0
            assert 0.0 <= quality["modularity_score"] <= 1.0
            assert len(quality["per_step"]) >= 1

    def test_cohort_artifacts(self, run_dir):
        alignment = json.loads((run_dir / "cohort" / "alignment.json").read_text())
        # 2 tasks x (1 agent x 2 humans) = 4 cross pairs
        assert len(alignment["rows"]) == 4
        for row in alignment["rows"]:
            assert row["kind_a"] == "agent" and row["kind_b"] == "human"
            assert 0.0 <= row["matching_percent"] <= 100.0
            assert "progress_percent" in row

        analytics = json.loads((run_dir / "cohort" / "analytics.json").read_text())
        groups = {g["group"]: g for g in analytics["groups"]}
        assert groups["agent"]["program_use_rate"] == 100.0
        assert groups["human"]["program_use_rate"] == 0.0
        assert analytics["deltas"]["agent"]["cost_saved_percent"] > 80.0
        assert len(analytics["per_trajectory"]) == 6

    def test_report_files(self, run_dir):
        groups_csv = (run_dir / "report" / "groups.csv").read_text()
        assert groups_csv.splitlines()[0].startswith("group,n,mean_actions")
        assert len(groups_csv.splitlines()) == 3  # header + 2 groups
        matrix_csv = (run_dir / "report" / "alignment_matrix.csv").read_text()
        assert len(matrix_csv.splitlines()) == 5  # header + 4 pairs
        series = json.loads((run_dir / "report" / "series.json").read_text())
        assert set(series["per_task"]) == {"elapsed_seconds", "actions", "cost_usd"}
        assert set(series["per_task"]["elapsed_seconds"]) == \
            {"sales-analysis", "stock-analysis-slides"}

    def test_run_summary_records_provenance(self, run_dir):
        summary = json.loads((run_dir / "run_summary.json").read_text())
        assert summary["annotator_id"] == "stub/v1"
        assert summary["config_fingerprint"]
        assert len(summary["trajectories"]) == 6

    def test_rerun_is_byte_identical(self, corpus, run_dir, tmp_path):
        manifest = load_manifest(corpus)
        before = digest_tree(run_dir)
        again = run_pipeline(manifest, PipelineConfig(), run_dir.parent)
        assert again == run_dir
        assert digest_tree(again) == before

    def test_parallel_run_matches_serial(self, corpus, run_dir):
        manifest = load_manifest(corpus)
        before = digest_tree(run_dir)
        again = run_pipeline(manifest, PipelineConfig(), run_dir.parent, jobs=4)
        assert digest_tree(again) == before

    def test_partial_rerun_produces_identical_artifacts(self, corpus, run_dir):
        manifest = load_manifest(corpus)
        before = digest_tree(run_dir)
        run_pipeline(manifest, PipelineConfig(), run_dir.parent,
                     stages=["align", "analyze", "report"])
        assert digest_tree(run_dir) == before


class TestStageHandling:
    def test_missing_upstream_artifact_is_named(self, corpus, tmp_path):
        manifest = load_manifest(corpus)
        with pytest.raises(InputError, match="workflow.json.*induce"):
            run_pipeline(manifest, PipelineConfig(), tmp_path, stages=["align"])

    def test_unknown_stage_rejected(self, corpus, tmp_path):
        manifest = load_manifest(corpus)
        with pytest.raises(InputError, match="unknown stages"):
            run_pipeline(manifest, PipelineConfig(), tmp_path, stages=["deploy"])

    def test_empty_manifest_rejected(self, tmp_path):
        with pytest.raises(InputError, match="no trajectories"):
            run_pipeline(CorpusManifest(entries=()), PipelineConfig(), tmp_path)

    def test_errors_are_attributed_to_trajectory(self, corpus, tmp_path):
        manifest = load_manifest(corpus)
        broken = manifest.entries[0]
        broken = type(broken)(path=broken.path.parent / "absent.jsonl",
                              task_id=broken.task_id, skill=broken.skill,
                              worker=broken.worker, instruction=broken.instruction)
        bad = CorpusManifest(entries=(broken,), results_path=manifest.results_path)
        with pytest.raises(InputError, match=r"\[sales-analysis/"):
            run_pipeline(bad, PipelineConfig(), tmp_path)


def test_three_by_three_cohort_emits_nine_alignment_rows(corpus, tmp_path):
    # one task done by 3 humans and 3 agents: the cross matrix has 9 rows
    import shutil
    base = Path(corpus).parent
    entries = []
    for kind, source in (("human", "sales-analysis__human-a.jsonl"),
                         ("agent", "sales-analysis__agent-oh.jsonl")):
        for i in range(3):
            name = f"matrix_{kind}{i}.jsonl"
            shutil.copy(base / source, base / name)  # frames stay shared
            entries.append({"path": name, "task_id": "sales-analysis",
                            "skill": "data_analysis",
                            "worker": {"worker_id": f"{kind}{i}", "kind": kind}})
    manifest_path = base / "matrix_manifest.json"
    manifest_path.write_text(json.dumps({"trajectories": entries}))
    run_dir = run_pipeline(load_manifest(manifest_path), PipelineConfig(),
                           tmp_path, stages=["preprocess", "segment", "induce",
                                             "align"])
    rows = json.loads((run_dir / "cohort" / "alignment.json").read_text())["rows"]
    assert len(rows) == 9
    assert all("progress_percent" in row for row in rows)


class CannedLmBackend:
    """Deterministic canned transcripts, chattier than the stub, keyed by
    request content. Stands in for a remote LM."""

    name = "llm-canned"

    def __init__(self):
        self.calls = 0

    def complete(self, request) -> str:
        self.calls += 1
        digest = cache_key(request)
        if request.kind == "same_software":
            same = request.payload["app_a"] == request.payload["app_b"]
            return ("Looking closely, yes: the same software."
                    if same else "These differ, so: no.")
        if request.kind == "summarize_goal":
            return f"work on part {digest[:6]}"
        if request.kind in ("consistency", "modularity"):
            return "Yes." if int(digest[:2], 16) % 4 else "No."
        return '{"pairs": []}'


class TestCannedLmRuns:
    def test_cache_makes_second_run_identical_and_cheap(self, corpus, tmp_path):
        manifest = load_manifest(corpus)
        cfg = PipelineConfig()
        backend = CannedLmBackend()
        cache = ResponseCache(tmp_path / "cache" / backend.name)
        annotator = Annotator(backend=backend, cache=cache)

        first_dir = run_pipeline(manifest, cfg, tmp_path / "out",
                                 annotator=annotator)
        first = digest_tree(first_dir)
        calls_after_first = backend.calls
        assert calls_after_first > 0

        second_dir = run_pipeline(manifest, cfg, tmp_path / "out",
                                  annotator=annotator)
        assert digest_tree(second_dir) == first
        assert backend.calls == calls_after_first  # all served from cache


def test_emit_report_needs_analytics(tmp_path):
    with pytest.raises(InputError, match="analyze"):
        emit_report(tmp_path)


def test_empty_cohort_emits_header_only_tables(tmp_path):
    cohort = tmp_path / "cohort"
    cohort.mkdir()
    (cohort / "analytics.json").write_text(json.dumps({
        "groups": [], "deltas": {}, "alignment_breakdown": [],
        "per_trajectory": []}))
    (cohort / "alignment.json").write_text(json.dumps({"rows": []}))
    report_dir = emit_report(tmp_path)
    groups_lines = (report_dir / "groups.csv").read_text().splitlines()
    matrix_lines = (report_dir / "alignment_matrix.csv").read_text().splitlines()
    assert len(groups_lines) == 1 and groups_lines[0].startswith("group,")
    assert len(matrix_lines) == 1 and matrix_lines[0].startswith("task_id,")
    series = json.loads((report_dir / "series.json").read_text())
    assert series["alignment_rows"] == []
