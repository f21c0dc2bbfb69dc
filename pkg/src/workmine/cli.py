"""Command-line interface wiring the full pipeline.

Exit codes: 0 success, 1 input error, 2 backend error, 3 internal
invariant violation. Credentials are only ever read from the environment.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from .alignment import align as align_workflows
from .alignment import load_overrides, result_to_doc
from .errors import BackendError, InputError, InvariantViolation
from .events import ingest_trajectory, validate_trajectory, write_session
from .hierarchy import annotate_goals, build_skeleton, workflow_from_doc, workflow_to_doc
from .pipeline import (PipelineConfig, STAGES, _quality_doc, _rebase_screenshots,
                       _segments_doc, build_annotator, emit_report, load_manifest,
                       run_pipeline)
from .preprocess import preprocess
from .quality import cohens_kappa, quality_report
from .segmentation import BoundaryPolicy, segment as segment_trajectory


def _echo_doc(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _load_json(path: str, what: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {what} {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed {what} JSON: {exc.msg}") from None


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=False),
              help="pipeline config JSON file")
@click.option("--annotator", "annotator_name", type=click.Choice(["stub", "llm"]),
              help="judgment backend (overrides the config file)")
@click.option("--cache-dir", type=click.Path(), help="annotator response cache directory")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="trajectory-level parallelism")
@click.option("--stages", help=f"subset of {','.join(STAGES)} for the run command")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, annotator_name: str | None,
        cache_dir: str | None, jobs: int, stages: str | None) -> None:
    """Induce and compare workflows from computer-use activity sessions."""
    config = PipelineConfig.from_file(config_path) if config_path else PipelineConfig()
    overrides = {}
    if annotator_name:
        overrides["annotator_backend"] = annotator_name
    if cache_dir:
        overrides["cache_dir"] = cache_dir
    if overrides:
        config = dataclasses.replace(config, **overrides)
    ctx.obj = {"config": config, "jobs": max(1, jobs), "stages": stages}


@cli.command()
@click.argument("session", type=click.Path())
@click.option("--strict", is_flag=True, help="abort on any invariant violation")
@click.option("--out", type=click.Path(), help="write the normalized session here")
@click.pass_context
def ingest(ctx: click.Context, session: str, strict: bool, out: str | None) -> None:
    """Read a session file, validate it, and summarize what was found."""
    t = ingest_trajectory(session, strict=strict)
    report = validate_trajectory(t)
    if out:
        write_session(t, out)
    _echo_doc({
        "task_id": t.task_id,
        "worker_id": t.worker.worker_id,
        "events": len(t.events),
        "elapsed_seconds": t.elapsed_seconds,
        "flags": [{"event": f.event_index, "code": f.code, "message": f.message}
                  for f in t.flags],
        "violations": [{"invariant": v.invariant, "event": v.event_index,
                        "message": v.message} for v in report],
    }, None)


@cli.command("preprocess")
@click.argument("session", type=click.Path())
@click.option("--out", type=click.Path(), required=True,
              help="where to write the merged session")
@click.pass_context
def preprocess_cmd(ctx: click.Context, session: str, out: str) -> None:
    """Merge keypress/scroll runs and pair double clicks."""
    config = ctx.obj["config"]
    t = ingest_trajectory(session)
    merged, stats = preprocess(t, config.preprocess)
    merged = _rebase_screenshots(merged, Path(out).resolve().parent)
    write_session(merged, out)
    _echo_doc({
        "events_before": stats.events_before,
        "events_after": stats.events_after,
        "reduction_fraction": stats.reduction_fraction,
        "out": str(out),
    }, None)


@cli.command("segment")
@click.argument("session", type=click.Path())
@click.option("--threshold", type=float, help="absolute MSE boundary threshold")
@click.option("--adaptive-k", type=float, help="adaptive threshold factor")
@click.option("--downscale", type=int, default=None, help="compare frames at 1/n size")
@click.option("--out", type=click.Path(), help="write segments JSON here")
@click.pass_context
def segment_cmd(ctx: click.Context, session: str, threshold: float | None,
                adaptive_k: float | None, downscale: int | None,
                out: str | None) -> None:
    """Detect visual boundaries and merge same-software neighbors."""
    config = ctx.obj["config"]
    policy = config.boundary
    if threshold is not None:
        policy = BoundaryPolicy(mode="absolute", threshold=threshold,
                                downscale=policy.downscale,
                                allow_mixed_sizes=policy.allow_mixed_sizes)
    elif adaptive_k is not None:
        policy = dataclasses.replace(policy, mode="adaptive", k=adaptive_k)
    if downscale is not None:
        policy = dataclasses.replace(policy, downscale=downscale)
    t = ingest_trajectory(session)
    segments = segment_trajectory(t, policy, build_annotator(config))
    _echo_doc(_segments_doc(segments), out)


@cli.command()
@click.argument("session", type=click.Path())
@click.option("--instruction", help="task instruction used as the root goal")
@click.option("--out", type=click.Path(), help="write the workflow JSON here")
@click.pass_context
def induce(ctx: click.Context, session: str, instruction: str | None,
           out: str | None) -> None:
    """Build the goal-annotated workflow hierarchy for one session."""
    config = ctx.obj["config"]
    annotator = build_annotator(config)
    t = ingest_trajectory(session)
    segments = segment_trajectory(t, config.boundary, annotator)
    skeleton = build_skeleton(t, segments, config.hierarchy)
    workflow = annotate_goals(skeleton, t, annotator,
                              task_instruction=instruction,
                              config_fingerprint=config.fingerprint())
    _echo_doc(workflow_to_doc(workflow), out)


@cli.command()
@click.option("--workflow", "workflow_path", type=click.Path(), required=True)
@click.option("--session", "session_path", type=click.Path(), required=True)
@click.option("--level", type=int, help="hierarchy level to judge (default: top steps)")
@click.option("--labels", "labels_path", type=click.Path(),
              help="manual per-step labels JSON for kappa")
@click.option("--out", type=click.Path())
@click.pass_context
def validate(ctx: click.Context, workflow_path: str, session_path: str,
             level: int | None, labels_path: str | None, out: str | None) -> None:
    """Judge per-step consistency and modularity; optionally compare with
    manual labels via Cohen's kappa."""
    config = ctx.obj["config"]
    workflow = workflow_from_doc(_load_json(workflow_path, "workflow"), workflow_path)
    t = ingest_trajectory(session_path)
    report = quality_report(workflow, t, build_annotator(config),
                            level=level if level is not None else config.judge_level,
                            stride=config.state_stride)
    doc = _quality_doc(report)
    if labels_path:
        labels = _load_json(labels_path, "labels")
        if not isinstance(labels, dict):
            raise InputError(f"{labels_path}: labels file must be an object")
        doc["kappa"] = {}
        for metric in ("consistency", "modularity"):
            if metric not in labels:
                continue
            manual = [bool(v) for v in labels[metric]]
            judged = [getattr(v, metric) for v in report.per_step]
            agreement = cohens_kappa(judged, manual)
            doc["kappa"][metric] = {
                "kappa": agreement.kappa,
                "undefined": agreement.undefined,
                "n": agreement.n,
                "confusion": [list(row) for row in agreement.confusion],
            }
    _echo_doc(doc, out)


@cli.command("align")
@click.argument("workflow_a", type=click.Path(), required=False)
@click.argument("workflow_b", type=click.Path(), required=False)
@click.option("--overrides", "overrides_path", type=click.Path(),
              help="manual match edits JSON")
@click.option("--level", type=int, help="hierarchy level to compare")
@click.option("--manifest", "manifest_path", type=click.Path(),
              help="cohort mode: align every pair in the manifest")
@click.option("--out-dir", type=click.Path(), help="cohort mode: pipeline output dir")
@click.option("--out", type=click.Path())
@click.pass_context
def align_cmd(ctx: click.Context, workflow_a: str | None, workflow_b: str | None,
              overrides_path: str | None, level: int | None,
              manifest_path: str | None, out_dir: str | None,
              out: str | None) -> None:
    """Match steps between two workflows, or across a whole cohort."""
    config = ctx.obj["config"]
    if manifest_path:
        if not out_dir:
            raise InputError("cohort alignment needs --out-dir")
        run_dir = run_pipeline(load_manifest(manifest_path), config, out_dir,
                               stages=["align"], jobs=ctx.obj["jobs"])
        click.echo(str(run_dir / "cohort" / "alignment.json"))
        return
    if not workflow_a or not workflow_b:
        raise InputError("align needs two workflow files (or --manifest)")
    wf_a = workflow_from_doc(_load_json(workflow_a, "workflow"), workflow_a)
    wf_b = workflow_from_doc(_load_json(workflow_b, "workflow"), workflow_b)
    overrides = load_overrides(overrides_path) if overrides_path else None
    result = align_workflows(wf_a, wf_b, build_annotator(config),
                             level=level if level is not None else config.align_level,
                             overrides=overrides)
    _echo_doc(result_to_doc(result), out)


@cli.command()
@click.argument("manifest", type=click.Path())
@click.option("--out-dir", type=click.Path(), required=True)
@click.pass_context
def analyze(ctx: click.Context, manifest: str, out_dir: str) -> None:
    """Compute cohort analytics over an existing run's artifacts."""
    config = ctx.obj["config"]
    run_dir = run_pipeline(load_manifest(manifest), config, out_dir,
                           stages=["analyze"], jobs=ctx.obj["jobs"])
    click.echo(str(run_dir / "cohort" / "analytics.json"))


@cli.command()
@click.argument("run_dir", type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["tables", "plotdata", "both"]),
              default="both", show_default=True)
def report(run_dir: str, fmt: str) -> None:
    """Emit flat tables and plot-ready series for a finished run."""
    formats = ("tables", "plotdata") if fmt == "both" else (fmt,)
    out = emit_report(run_dir, formats=formats)
    click.echo(str(out))


@cli.command()
@click.argument("manifest", type=click.Path())
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--stages", help=f"comma-separated subset of {','.join(STAGES)}")
@click.pass_context
def run(ctx: click.Context, manifest: str, out_dir: str, stages: str | None) -> None:
    """Run the pipeline (all stages by default) over a corpus manifest."""
    config = ctx.obj["config"]
    stages = stages or ctx.obj["stages"]
    stage_list = [s.strip() for s in stages.split(",") if s.strip()] if stages else None
    run_dir = run_pipeline(load_manifest(manifest), config, out_dir,
                           stages=stage_list, jobs=ctx.obj["jobs"])
    click.echo(str(run_dir))


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except BackendError as exc:
        click.echo(f"backend error: {exc}", err=True)
        return 2
    except InvariantViolation as exc:
        click.echo(f"invariant violation: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
