"""Cohort analytics: tool profiles, program use, efficiency and cost deltas.

Tool classification is data, not code: an ordered rules file maps events to
tool names and a programmatic flag, first match wins, and a catch-all
"unknown" rule ships at the end so labeling is total. Group comparisons
report ratio-of-means percent deltas against a declared reference group.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Any, Iterable

from .errors import InputError
from .events import RawEvent, Trajectory
from .hierarchy import Workflow, flatten
from .alignment import AlignmentResult
from .quality import default_judge_level


@dataclass(frozen=True)
class ToolRule:
    tool: str  # "$app" substitutes the event's app field
    programmatic: bool
    name: str = ""
    kinds: tuple[str, ...] | None = None
    app: str | None = None  # "*" = any recorded app, else substring match
    arg: str | None = None  # substring over the event's argument values

    def matches(self, event: RawEvent) -> bool:
        if self.kinds is not None and event.kind.name not in self.kinds:
            return False
        if self.app is not None:
            if event.app is None:
                return False
            if self.app != "*" and self.app.lower() not in event.app.lower():
                return False
        if self.arg is not None:
            joined = " ".join(v for _, v in sorted(event.args.items()))
            if self.arg.lower() not in joined.lower():
                return False
        return True

    def resolve_tool(self, event: RawEvent) -> str:
        if self.tool == "$app":
            return event.app or "unknown"
        return self.tool


# Matching always terminates here, whatever the rules file says.
DEFAULT_RULE = ToolRule(tool="unknown", programmatic=False, name="default")


def _rule_from_doc(doc: Any, where: str) -> ToolRule:
    if not isinstance(doc, dict) or "tool" not in doc or "programmatic" not in doc:
        raise InputError(f"{where}: each rule needs at least tool and programmatic")
    kinds = doc.get("kinds")
    if kinds is not None:
        if not isinstance(kinds, list) or not all(isinstance(k, str) for k in kinds):
            raise InputError(f"{where}: kinds must be a list of strings")
        kinds = tuple(kinds)
    return ToolRule(tool=str(doc["tool"]), programmatic=bool(doc["programmatic"]),
                    name=str(doc.get("name", "")), kinds=kinds,
                    app=doc.get("app"), arg=doc.get("arg"))


def load_tool_rules(path: str | None = None) -> list[ToolRule]:
    """Rules from a JSON file (bundled defaults when no path is given),
    with the catch-all rule appended."""
    if path is None:
        text = resources.files("workmine").joinpath("data/tool_rules.json").read_text("utf-8")
        where = "<bundled tool rules>"
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read tool rules {path}: {exc}") from None
        where = path
    try:
        docs = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{where}: malformed rules JSON: {exc.msg}") from None
    if not isinstance(docs, list):
        raise InputError(f"{where}: rules file must be a JSON list")
    rules = [_rule_from_doc(d, f"{where}: rule {i}") for i, d in enumerate(docs)]
    rules.append(DEFAULT_RULE)
    return rules


def _label_event(event: RawEvent, rules: list[ToolRule]) -> tuple[int, str, bool]:
    for idx, rule in enumerate(rules):
        if rule.matches(event):
            return idx, rule.resolve_tool(event), rule.programmatic
    return len(rules) - 1, DEFAULT_RULE.tool, DEFAULT_RULE.programmatic


@dataclass(frozen=True)
class ToolLabel:
    step_index: int
    tool: str
    programmatic: bool


def label_tools(w: Workflow, t: Trajectory, rules: list[ToolRule],
                level: int | None = None) -> list[ToolLabel]:
    """Label each step with the tool that dominates its events.

    Majority of events wins; ties go to the earlier rule, then the
    lexicographically smaller tool name.
    """
    level = default_judge_level(w) if level is None else level
    labels = []
    for i, step in enumerate(flatten(w.root, level)):
        counts: dict[tuple[int, str, bool], int] = {}
        for event in t.events[step.span[0]:step.span[1]]:
            key = _label_event(event, rules)
            counts[key] = counts.get(key, 0) + 1
        if not counts:
            labels.append(ToolLabel(i, DEFAULT_RULE.tool, DEFAULT_RULE.programmatic))
            continue
        (_, tool, programmatic), _ = min(
            counts.items(), key=lambda kv: (-kv[1], kv[0][0], kv[0][1]))
        labels.append(ToolLabel(i, tool, programmatic))
    return labels


def uses_program(w: Workflow, t: Trajectory, rules: list[ToolRule],
                 level: int | None = None) -> bool:
    return any(label.programmatic for label in label_tools(w, t, rules, level))


def program_use_rate(items: Iterable[tuple[Workflow, Trajectory]],
                     rules: list[ToolRule], level: int | None = None,
                     unit: str = "trajectory") -> float:
    """Percent of trajectories with at least one programmatic step.

    ``unit="step"`` switches to the share of programmatic steps across the
    whole cohort.
    """
    items = list(items)
    if not items:
        raise InputError("program_use_rate needs a non-empty cohort")
    if unit == "trajectory":
        hits = sum(1 for w, t in items if uses_program(w, t, rules, level))
        return 100.0 * hits / len(items)
    if unit == "step":
        labels = [lab for w, t in items for lab in label_tools(w, t, rules, level)]
        if not labels:
            raise InputError("cohort has no steps to label")
        return 100.0 * sum(1 for lab in labels if lab.programmatic) / len(labels)
    raise InputError(f"unknown program_use_rate unit {unit!r}")


# --- efficiency and cost comparisons ------------------------------------------

@dataclass(frozen=True)
class TrajectoryStats:
    """Per-trajectory facts entering cohort comparisons. Success and cost
    are ingested from external results, never computed here."""

    task_id: str
    worker_id: str
    kind: str
    framework: str | None = None
    ai_usage: str | None = None
    skill: str | None = None
    actions: int = 0
    elapsed_seconds: float = 0.0
    cost_usd: float | None = None
    success: bool | None = None
    uses_program: bool | None = None


GROUP_FIELDS = ("kind", "framework", "ai_usage", "skill", "task_id")


@dataclass(frozen=True)
class GroupRow:
    group: str
    n: int
    mean_actions: float
    mean_elapsed_seconds: float
    mean_cost_usd: float | None
    success_rate: float | None
    program_use_rate: float | None


@dataclass(frozen=True)
class CohortReport:
    group_by: str
    reference: str
    rows: tuple[GroupRow, ...]
    # group -> {"time_saved_percent", "actions_saved_percent", "cost_saved_percent"}
    deltas: dict[str, dict[str, float | None]]
    shared_success_filter: bool


def percent_delta(value: float, reference: float) -> float:
    """100 * (1 - value / reference): positive when value beats reference."""
    if reference == 0:
        raise InputError("reference mean is zero; delta undefined")
    return 100.0 * (1.0 - value / reference)


def _group_label(s: TrajectoryStats, group_by: str) -> str:
    value = getattr(s, group_by)
    return "none" if value is None else str(value)


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def _filter_shared_successes(stats: list[TrajectoryStats], group_by: str
                             ) -> list[TrajectoryStats]:
    groups = sorted({_group_label(s, group_by) for s in stats})
    shared_tasks = set()
    for task in sorted({s.task_id for s in stats}):
        ok = all(any(s.success for s in stats
                     if s.task_id == task and _group_label(s, group_by) == g)
                 for g in groups)
        if ok:
            shared_tasks.add(task)
    return [s for s in stats if s.task_id in shared_tasks and s.success]


def efficiency_report(stats: Iterable[TrajectoryStats], group_by: str = "kind",
                      reference: str = "human",
                      only_shared_successes: bool = False,
                      ratio_of_means: bool = True) -> CohortReport:
    """Group means plus percent deltas against the reference group.

    ``only_shared_successes`` restricts to successful runs on tasks every
    group has succeeded at. Deltas default to ratio-of-means; the
    mean-of-ratios alternative averages per-task ratios over tasks the
    group shares with the reference.
    """
    if group_by not in GROUP_FIELDS:
        raise InputError(f"group_by must be one of {GROUP_FIELDS}")
    stats = list(stats)
    if only_shared_successes:
        stats = _filter_shared_successes(stats, group_by)
    groups: dict[str, list[TrajectoryStats]] = {}
    for s in stats:
        groups.setdefault(_group_label(s, group_by), []).append(s)
    if reference not in groups:
        raise InputError(f"reference group {reference!r} not present "
                         f"(have {sorted(groups)})")

    rows = []
    for label in sorted(groups):
        members = groups[label]
        costs = [s.cost_usd for s in members if s.cost_usd is not None]
        successes = [s.success for s in members if s.success is not None]
        programs = [s.uses_program for s in members if s.uses_program is not None]
        rows.append(GroupRow(
            group=label,
            n=len(members),
            mean_actions=sum(s.actions for s in members) / len(members),
            mean_elapsed_seconds=sum(s.elapsed_seconds for s in members) / len(members),
            mean_cost_usd=_mean(costs),
            success_rate=(100.0 * sum(successes) / len(successes)) if successes else None,
            program_use_rate=(100.0 * sum(programs) / len(programs)) if programs else None,
        ))
    by_label = {row.group: row for row in rows}
    ref_row = by_label[reference]

    def delta_for(row: GroupRow, field: str) -> float | None:
        ref_value = getattr(ref_row, field)
        value = getattr(row, field)
        if ref_value is None or value is None:
            return None
        if ratio_of_means:
            return percent_delta(value, ref_value)
        return _mean_of_ratios_delta(groups[row.group], groups[reference], field)

    deltas = {}
    for row in rows:
        if row.group == reference:
            continue
        deltas[row.group] = {
            "time_saved_percent": delta_for(row, "mean_elapsed_seconds"),
            "actions_saved_percent": delta_for(row, "mean_actions"),
            "cost_saved_percent": delta_for(row, "mean_cost_usd"),
        }
    return CohortReport(group_by=group_by, reference=reference, rows=tuple(rows),
                        deltas=deltas, shared_success_filter=only_shared_successes)


_STAT_FIELDS = {"mean_actions": "actions",
                "mean_elapsed_seconds": "elapsed_seconds",
                "mean_cost_usd": "cost_usd"}


def _mean_of_ratios_delta(members: list[TrajectoryStats],
                          reference: list[TrajectoryStats], field: str
                          ) -> float | None:
    attr = _STAT_FIELDS[field]
    ratios = []
    for task in sorted({s.task_id for s in members}):
        mine = [getattr(s, attr) for s in members
                if s.task_id == task and getattr(s, attr) is not None]
        ref = [getattr(s, attr) for s in reference
               if s.task_id == task and getattr(s, attr) is not None]
        if mine and ref and sum(ref):
            ratios.append((sum(mine) / len(mine)) / (sum(ref) / len(ref)))
    if not ratios:
        return None
    return 100.0 * (1.0 - sum(ratios) / len(ratios))


# --- alignment breakdowns ------------------------------------------------------

@dataclass(frozen=True)
class BreakdownRow:
    n: int
    mean_matching_percent: float
    mean_order_percent: float | None  # None when no pair had a defined order


def alignment_breakdown(entries: Iterable[tuple[tuple[str, ...], AlignmentResult]]
                        ) -> dict[tuple[str, ...], BreakdownRow]:
    """Mean alignment metrics per group-key pair.

    Pairs whose order metric is undefined are excluded from the order mean
    but still count toward matching.
    """
    buckets: dict[tuple[str, ...], list[AlignmentResult]] = {}
    for key, result in entries:
        buckets.setdefault(tuple(key), []).append(result)
    out = {}
    for key in sorted(buckets):
        results = buckets[key]
        orders = [r.order_percent for r in results if r.order_percent is not None]
        out[key] = BreakdownRow(
            n=len(results),
            mean_matching_percent=sum(r.matching_percent for r in results) / len(results),
            mean_order_percent=sum(orders) / len(orders) if orders else None,
        )
    return out
