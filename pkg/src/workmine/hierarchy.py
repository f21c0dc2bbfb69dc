"""Compositional workflow trees over segmented sessions.

The tree shape is fixed by deterministic rules so induction is reproducible
and the annotator only names nodes, never shapes them: level 0 holds one
leaf per event, level 1 groups maximal same-app (or same-kind) runs inside
a segment, level 2 mirrors the segments, and levels above chunk adjacent
nodes until a single root remains. Goals are then filled in bottom-up, with
parents summarized from their children's goal texts.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Any, Iterator

from .annotator import Annotator, FrameHandle
from .errors import AnnotatorParseError, BackendError, InputError, InvariantViolation
from .events import Trajectory, render_event
from .segmentation import Segment, frame_handle


@dataclass
class WorkflowNode:
    goal: str
    level: int
    span: tuple[int, int]  # [start, end) positions in the event sequence
    children: list["WorkflowNode"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["WorkflowNode"]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class HierarchyConfig:
    max_depth: int = 4  # highest level number the root may reach
    micro_step_rule: str = "same_app_run"  # "same_app_run" | "same_kind_run"
    fanout_limit: int = 12  # max children before an extra grouping level

    def __post_init__(self) -> None:
        if self.max_depth < 2:
            raise InputError("max_depth must be at least 2")
        if self.fanout_limit < 2:
            raise InputError("fanout_limit must be at least 2")
        if self.micro_step_rule not in ("same_app_run", "same_kind_run"):
            raise InputError(f"unknown micro_step_rule {self.micro_step_rule!r}")


@dataclass
class Workflow:
    root: WorkflowNode
    trajectory_ref: tuple[str, str]  # (task_id, worker_id)
    config_fingerprint: str
    annotator_id: str

    @property
    def depth(self) -> int:
        return self.root.level


def validate_tree(root: WorkflowNode, n_events: int,
                  max_depth: int | None = None) -> None:
    """Assert the span algebra on every node; raises InvariantViolation.

    Checks containment, contiguity, level ordering, leaf coverage of every
    event, and the optional depth cap.
    """
    if root.span != (0, n_events):
        raise InvariantViolation(f"root span {root.span} != (0, {n_events})")
    if max_depth is not None and root.level > max_depth:
        raise InvariantViolation(f"root level {root.level} exceeds max depth {max_depth}")
    leaf_spans: list[tuple[int, int]] = []

    def visit(node: WorkflowNode) -> None:
        start, end = node.span
        if not (0 <= start < end <= n_events):
            raise InvariantViolation(f"node span {node.span} out of range")
        if node.is_leaf:
            if node.level != 0:
                raise InvariantViolation(f"leaf at level {node.level}, expected 0")
            leaf_spans.append(node.span)
            return
        if node.span != (node.children[0].span[0], node.children[-1].span[1]):
            raise InvariantViolation(
                f"node span {node.span} is not the union of its children")
        cursor = start
        for child in node.children:
            if child.span[0] != cursor:
                raise InvariantViolation(
                    f"child spans not contiguous at {child.span[0]}, expected {cursor}")
            if child.level >= node.level:
                raise InvariantViolation(
                    f"child level {child.level} not below parent level {node.level}")
            cursor = child.span[1]
            visit(child)

    visit(root)
    cursor = 0
    for start, end in leaf_spans:
        if start != cursor:
            raise InvariantViolation(f"leaves skip events at position {cursor}")
        cursor = end
    if cursor != n_events:
        raise InvariantViolation(f"leaves cover {cursor} of {n_events} events")


def _runs(t: Trajectory, seg: Segment, rule: str) -> list[tuple[int, int]]:
    def key(pos: int) -> Any:
        event = t.events[pos]
        return event.app if rule == "same_app_run" else event.kind.name

    runs: list[tuple[int, int]] = []
    start = seg.start
    for pos in range(seg.start + 1, seg.end):
        if key(pos) != key(pos - 1):
            runs.append((start, pos))
            start = pos
    runs.append((start, seg.end))
    return runs


def _chunks(nodes: list[WorkflowNode], limit: int) -> list[list[WorkflowNode]]:
    n_groups = math.ceil(len(nodes) / limit)
    base, extra = divmod(len(nodes), n_groups)
    out = []
    cursor = 0
    for g in range(n_groups):
        size = base + (1 if g < extra else 0)
        out.append(nodes[cursor:cursor + size])
        cursor += size
    return out


def build_skeleton(t: Trajectory, segments: list[Segment],
                   cfg: HierarchyConfig | None = None) -> WorkflowNode:
    """Goal-less node tree over the trajectory's events.

    When there are more segments than ``fanout_limit``, extra grouping
    levels are inserted below the root; if that would push the root past
    ``max_depth``, the depth cap wins and the top fanout is allowed to
    exceed the limit.
    """
    cfg = cfg or HierarchyConfig()
    if not t.events:
        raise InputError("cannot build a workflow over an empty trajectory")
    segment_nodes: list[WorkflowNode] = []
    for seg in segments:
        micro_nodes = [
            WorkflowNode(goal="", level=1, span=(start, end),
                         children=[WorkflowNode(goal="", level=0, span=(p, p + 1))
                                   for p in range(start, end)])
            for start, end in _runs(t, seg, cfg.micro_step_rule)
        ]
        segment_nodes.append(WorkflowNode(goal="", level=2,
                                          span=(seg.start, seg.end),
                                          children=micro_nodes))
    tier = segment_nodes
    level = 3
    while len(tier) > cfg.fanout_limit and level < cfg.max_depth:
        tier = [WorkflowNode(goal="", level=level,
                             span=(group[0].span[0], group[-1].span[1]),
                             children=group)
                for group in _chunks(tier, cfg.fanout_limit)]
        level += 1
    root = WorkflowNode(goal="", level=level, span=(0, len(t.events)), children=tier)
    validate_tree(root, len(t.events), max_depth=cfg.max_depth)
    return root


def _last_state(t: Trajectory, span: tuple[int, int]) -> FrameHandle | None:
    for pos in range(span[1] - 1, span[0] - 1, -1):
        handle = frame_handle(t, t.events[pos])
        if handle is not None:
            return handle
    return None


def _span_app(t: Trajectory, span: tuple[int, int]) -> str | None:
    counts: dict[str, int] = {}
    order: dict[str, int] = {}
    for pos in range(span[0], span[1]):
        app = t.events[pos].app
        if app is not None:
            counts[app] = counts.get(app, 0) + 1
            order.setdefault(app, pos)
    if not counts:
        return None
    return max(counts, key=lambda app: (counts[app], -order[app]))


def _node_path(path: tuple[int, ...]) -> str:
    return "root" + "".join(f".{i}" for i in path)


def annotate_goals(tree: WorkflowNode, t: Trajectory, annotator: Annotator,
                   task_instruction: str | None = None,
                   config_fingerprint: str = "") -> Workflow:
    """Fill in goals bottom-up and wrap the tree as a Workflow.

    Leaves and micro-steps are summarized from their actions plus the last
    screenshot in their span (the completed state); every higher node is
    summarized from its children's goal texts. The root keeps the task
    instruction when one is known. The input skeleton is not modified.
    An empty or unparseable summary is retried once per node.
    """
    root = copy.deepcopy(tree)

    def summarize(node: WorkflowNode) -> str:
        if node.level <= 1:
            events = t.events[node.span[0]:node.span[1]]
            return annotator.summarize_step_goal(
                actions=[render_event(e) for e in events],
                kinds=[e.kind.name for e in events],
                arg_values=[" ".join(v for _, v in sorted(e.args.items()))
                            for e in events],
                app=_span_app(t, node.span),
                state=_last_state(t, node.span),
            )
        return annotator.summarize_parent_goal([c.goal for c in node.children])

    def visit(node: WorkflowNode, path: tuple[int, ...]) -> None:
        for i, child in enumerate(node.children):
            visit(child, path + (i,))
        try:
            try:
                node.goal = summarize(node)
            except AnnotatorParseError:
                node.goal = summarize(node)  # one retry for empty goals
        except BackendError as exc:
            raise type(exc)(f"goal annotation failed at {_node_path(path)}: {exc}") from exc

    visit(root, ())
    if task_instruction:
        root.goal = task_instruction
    return Workflow(root=root,
                    trajectory_ref=(t.task_id, t.worker.worker_id),
                    config_fingerprint=config_fingerprint,
                    annotator_id=annotator.id)


def flatten(root: WorkflowNode, level: int) -> list[WorkflowNode]:
    """In-order nodes at the given level.

    Subtrees that bottom out before reaching the level contribute their
    shallower node as-is, so the result always partitions the root's span.
    """
    if not (0 <= level <= root.level):
        raise InputError(f"level {level} out of range 0..{root.level}")
    out: list[WorkflowNode] = []

    def cut(node: WorkflowNode) -> None:
        if node.level <= level or node.is_leaf:
            out.append(node)
        else:
            for child in node.children:
                cut(child)

    cut(root)
    return out


# --- workflow (de)serialization ----------------------------------------------

def _node_doc(node: WorkflowNode) -> dict:
    doc: dict[str, Any] = {"goal": node.goal, "level": node.level,
                           "span": [node.span[0], node.span[1]]}
    if node.children:
        doc["children"] = [_node_doc(c) for c in node.children]
    return doc


def _node_from_doc(doc: Any, where: str) -> WorkflowNode:
    if not isinstance(doc, dict):
        raise InputError(f"{where}: workflow node must be an object")
    try:
        goal, level, span = doc["goal"], doc["level"], doc["span"]
    except KeyError as exc:
        raise InputError(f"{where}: node missing field {exc.args[0]!r}") from None
    if not (isinstance(span, list) and len(span) == 2
            and all(isinstance(v, int) for v in span)):
        raise InputError(f"{where}: span must be a [start, end] pair")
    children = [_node_from_doc(c, where) for c in doc.get("children", [])]
    return WorkflowNode(goal=str(goal), level=int(level),
                        span=(span[0], span[1]), children=children)


def workflow_to_doc(w: Workflow) -> dict:
    return {
        "trajectory_ref": {"task_id": w.trajectory_ref[0],
                           "worker_id": w.trajectory_ref[1]},
        "config_fingerprint": w.config_fingerprint,
        "annotator_id": w.annotator_id,
        "root": _node_doc(w.root),
    }


def workflow_from_doc(doc: Any, where: str = "<workflow>") -> Workflow:
    if not isinstance(doc, dict) or "root" not in doc:
        raise InputError(f"{where}: workflow document must be an object with a root")
    ref = doc.get("trajectory_ref", {})
    if not isinstance(ref, dict):
        raise InputError(f"{where}: trajectory_ref must be an object")
    return Workflow(
        root=_node_from_doc(doc["root"], where),
        trajectory_ref=(str(ref.get("task_id", "")), str(ref.get("worker_id", ""))),
        config_fingerprint=str(doc.get("config_fingerprint", "")),
        annotator_id=str(doc.get("annotator_id", "")),
    )
