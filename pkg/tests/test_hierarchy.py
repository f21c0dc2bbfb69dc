import json
import random

import pytest

from helpers import click, keypress, trajectory
from workmine.annotator import Annotator, AnnotatorRequest
from workmine.errors import AnnotatorParseError, BackendError, InputError, InvariantViolation
from workmine.hierarchy import (HierarchyConfig, WorkflowNode, annotate_goals,
                                build_skeleton, flatten, validate_tree,
                                workflow_from_doc, workflow_to_doc)
from workmine.segmentation import Segment


def segments_for(n_events: int, cuts: list[int]) -> list[Segment]:
    bounds = [0] + cuts + [n_events]
    return [Segment(s, e) for s, e in zip(bounds, bounds[1:])]


def typing_trajectory(n: int, app: str = "Notes"):
    return trajectory([keypress(i, 0.1 * i, "x", app=app) for i in range(n)])


class TestSkeleton:
    def test_minimal_tree_shape(self):
        # 1 segment, 1 app, 3 events: root -> one segment node -> one
        # micro-step -> three leaves
        t = typing_trajectory(3)
        root = build_skeleton(t, segments_for(3, []))
        assert root.level == 3 and root.span == (0, 3)
        assert len(root.children) == 1
        seg_node = root.children[0]
        assert seg_node.level == 2 and len(seg_node.children) == 1
        micro = seg_node.children[0]
        assert micro.level == 1 and len(micro.children) == 3
        assert all(leaf.level == 0 for leaf in micro.children)

    def test_micro_steps_split_on_app_change(self):
        events = [click(0, 0.0, app="Excel"), click(1, 1.0, app="Excel"),
                  click(2, 2.0, app="Chrome")]
        root = build_skeleton(trajectory(events), segments_for(3, []))
        micro_spans = [c.span for c in root.children[0].children]
        assert micro_spans == [(0, 2), (2, 3)]

    def test_micro_steps_by_kind_rule(self):
        events = [click(0, 0.0, app="A"), click(1, 1.0, app="A"),
                  keypress(2, 2.0, "x", app="A")]
        cfg = HierarchyConfig(micro_step_rule="same_kind_run")
        root = build_skeleton(trajectory(events), segments_for(3, []), cfg)
        micro_spans = [c.span for c in root.children[0].children]
        assert micro_spans == [(0, 2), (2, 3)]

    def test_thirty_segments_gain_one_grouping_level(self):
        t = typing_trajectory(30)
        root = build_skeleton(t, segments_for(30, list(range(1, 30))),
                              HierarchyConfig(fanout_limit=12))
        # ceil(30 / 12) = 3 groups of segments under the root
        assert root.level == 4
        assert len(root.children) == 3
        assert all(c.level == 3 for c in root.children)
        assert sum(len(c.children) for c in root.children) == 30

    def test_max_depth_wins_over_fanout(self):
        t = typing_trajectory(60)
        root = build_skeleton(t, segments_for(60, list(range(1, 60))),
                              HierarchyConfig(fanout_limit=4, max_depth=4))
        assert root.level == 4  # capped, even though 15 groups > fanout 4
        validate_tree(root, 60, max_depth=4)

    def test_spans_validate(self):
        t = typing_trajectory(12)
        root = build_skeleton(t, segments_for(12, [4, 8]))
        validate_tree(root, 12)

    def test_config_validation(self):
        with pytest.raises(InputError):
            HierarchyConfig(max_depth=1)
        with pytest.raises(InputError):
            HierarchyConfig(fanout_limit=1)
        with pytest.raises(InputError):
            HierarchyConfig(micro_step_rule="by_vibes")


class TestValidateTree:
    def test_rejects_gap_between_children(self):
        root = WorkflowNode("g", 2, (0, 4), children=[
            WorkflowNode("a", 0, (0, 2)),
            WorkflowNode("b", 0, (3, 4)),
        ])
        with pytest.raises(InvariantViolation):
            validate_tree(root, 4)

    def test_rejects_leaf_above_level_zero(self):
        root = WorkflowNode("g", 2, (0, 2), children=[WorkflowNode("a", 1, (0, 2))])
        with pytest.raises(InvariantViolation):
            validate_tree(root, 2)

    def test_rejects_child_at_parent_level(self):
        root = WorkflowNode("g", 1, (0, 1), children=[WorkflowNode("a", 1, (0, 1))])
        with pytest.raises(InvariantViolation):
            validate_tree(root, 1)


def random_skeleton(rng: random.Random):
    """Random but invariant-satisfying skeleton via the builder itself."""
    n = rng.randint(1, 40)
    apps = ["A", "B", "C"]
    events = [click(i, float(i), app=rng.choice(apps)) for i in range(n)]
    cuts = sorted(rng.sample(range(1, n), rng.randint(0, min(6, n - 1)))) if n > 1 else []
    cfg = HierarchyConfig(fanout_limit=rng.choice([2, 3, 12]))
    t = trajectory(events)
    return build_skeleton(t, segments_for(n, cuts), cfg), n


class TestFlatten:
    def test_root_level_returns_root(self):
        t = typing_trajectory(4)
        root = build_skeleton(t, segments_for(4, []))
        assert flatten(root, root.level) == [root]

    def test_level_zero_returns_leaves(self):
        t = typing_trajectory(4)
        root = build_skeleton(t, segments_for(4, [2]))
        leaves = flatten(root, 0)
        assert [n.span for n in leaves] == [(i, i + 1) for i in range(4)]

    def test_out_of_range_level(self):
        t = typing_trajectory(2)
        root = build_skeleton(t, segments_for(2, []))
        with pytest.raises(InputError):
            flatten(root, root.level + 1)
        with pytest.raises(InputError):
            flatten(root, -1)

    def test_flatten_partitions_at_every_level_on_random_skeletons(self):
        rng = random.Random(77)
        for _ in range(60):
            root, n = random_skeleton(rng)
            validate_tree(root, n)
            for level in range(root.level + 1):
                steps = flatten(root, level)
                cursor = 0
                for step in steps:
                    assert step.span[0] == cursor
                    cursor = step.span[1]
                assert cursor == n

    def test_flatten_emits_shallow_nodes_past_the_cut(self):
        # a leaf hanging directly under the root is emitted as itself when
        # cutting at an intermediate level
        root = WorkflowNode("g", 3, (0, 4), children=[
            WorkflowNode("s", 2, (0, 3), children=[
                WorkflowNode("m", 1, (0, 3), children=[
                    WorkflowNode("l", 0, (i, i + 1)) for i in range(3)])]),
            WorkflowNode("stray", 0, (3, 4)),
        ])
        spans = [n.span for n in flatten(root, 1)]
        assert spans == [(0, 3), (3, 4)]


class TestGoalAnnotation:
    def test_stub_goals_and_root_instruction(self, stub_annotator):
        t = typing_trajectory(3)
        skeleton = build_skeleton(t, segments_for(3, []))
        wf = annotate_goals(skeleton, t, stub_annotator,
                            task_instruction="prepare the notes")
        assert wf.root.goal == "prepare the notes"
        micro = wf.root.children[0].children[0]
        assert micro.goal == "type text in Notes"
        assert wf.annotator_id == "stub/v1"
        assert wf.trajectory_ref == ("task-1", "w1")

    def test_parent_goal_is_child_join(self, stub_annotator):
        events = [click(0, 0.0, app="Excel"), keypress(1, 1.0, "x", app="Chrome")]
        t = trajectory(events)
        skeleton = build_skeleton(t, segments_for(2, [1]))
        wf = annotate_goals(skeleton, t, stub_annotator)
        # two segment nodes, each named after its micro-step, root joins them
        assert wf.root.goal == "click element in Excel; type text in Chrome"

    def test_structure_is_untouched_and_input_not_mutated(self, stub_annotator):
        t = typing_trajectory(5)
        skeleton = build_skeleton(t, segments_for(5, [2]))
        shape_before = [(n.level, n.span) for n in skeleton.walk()]
        wf = annotate_goals(skeleton, t, stub_annotator)
        assert [(n.level, n.span) for n in wf.root.walk()] == shape_before
        assert all(n.goal == "" for n in skeleton.walk())  # input untouched
        assert all(n.goal for n in wf.root.walk())  # output fully annotated

    def test_bit_deterministic_across_runs(self, stub_annotator):
        t = typing_trajectory(9)
        skeleton = build_skeleton(t, segments_for(9, [3, 6]))
        doc_a = json.dumps(workflow_to_doc(
            annotate_goals(skeleton, t, stub_annotator)), sort_keys=True)
        doc_b = json.dumps(workflow_to_doc(
            annotate_goals(skeleton, t, stub_annotator)), sort_keys=True)
        assert doc_a == doc_b

    def test_empty_goal_retried_once_then_error(self):
        class FlakyBackend:
            name = "flaky"

            def __init__(self, fail_times: int):
                self.remaining = fail_times

            def complete(self, request: AnnotatorRequest) -> str:
                if self.remaining > 0:
                    self.remaining -= 1
                    return "   "  # empty summary -> parse error
                return "a useful goal"

        t = typing_trajectory(1)
        skeleton = build_skeleton(t, segments_for(1, []))
        wf = annotate_goals(skeleton, t, Annotator(backend=FlakyBackend(1)))
        assert wf.root.goal == "a useful goal"
        with pytest.raises(AnnotatorParseError, match="root"):
            annotate_goals(skeleton, t, Annotator(backend=FlakyBackend(99)))

    def test_backend_failure_names_node_path(self):
        class DeadBackend:
            name = "dead"

            def complete(self, request):
                raise BackendError("synthetic outage")

        t = typing_trajectory(2)
        skeleton = build_skeleton(t, segments_for(2, []))
        annotator = Annotator(backend=DeadBackend())
        annotator.policy.max_attempts = 1
        annotator.policy.sleep = lambda _: None
        with pytest.raises(BackendError, match=r"root\.0\.0"):
            annotate_goals(skeleton, t, annotator)


def test_slide_task_fixture_induces_full_hierarchy(tmp_path, stub_annotator):
    # the bundled slide-deck session: induction reaches from the task root
    # down to individual click/keypress leaves, all goal-annotated
    from workmine.events import ingest_trajectory
    from workmine.preprocess import preprocess
    from workmine.segmentation import segment
    from workmine.synth import build_corpus

    build_corpus(tmp_path / "corpus", seed=7)
    t = ingest_trajectory(tmp_path / "corpus" / "stock-analysis-slides__human-a.jsonl")
    merged, _ = preprocess(t)
    segments = segment(merged, annotator=stub_annotator)
    skeleton = build_skeleton(merged, segments)
    wf = annotate_goals(skeleton, merged, stub_annotator,
                        task_instruction="Create and edit stock analysis presentations")
    assert wf.root.goal == "Create and edit stock analysis presentations"
    leaves = flatten(wf.root, 0)
    assert {leaf.span[1] - leaf.span[0] for leaf in leaves} == {1}
    leaf_kinds = {merged.events[leaf.span[0]].kind.name for leaf in leaves}
    assert {"click", "keypress"} <= leaf_kinds
    # both applications surface in the annotated goals
    goals = " ".join(n.goal for n in wf.root.walk())
    assert "Excel" in goals and "PowerPoint" in goals
    validate_tree(wf.root, len(merged.events))


def test_workflow_doc_round_trip(stub_annotator):
    t = typing_trajectory(6)
    skeleton = build_skeleton(t, segments_for(6, [3]))
    wf = annotate_goals(skeleton, t, stub_annotator, task_instruction="do it",
                        config_fingerprint="abc123")
    doc = workflow_to_doc(wf)
    again = workflow_from_doc(doc)
    assert workflow_to_doc(again) == doc
    assert again.config_fingerprint == "abc123"
    assert again.root.span == (0, 6)
