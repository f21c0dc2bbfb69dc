import random

import pytest

from helpers import click, event, trajectory
from workmine.alignment import AlignmentResult
from workmine.analytics import (DEFAULT_RULE, ToolRule, TrajectoryStats,
                                alignment_breakdown, efficiency_report,
                                label_tools, load_tool_rules, percent_delta,
                                program_use_rate, uses_program)
from workmine.errors import InputError
from workmine.hierarchy import Workflow, WorkflowNode

APP_RULE = ToolRule(tool="$app", programmatic=False, app="*")
RUN_RULE = ToolRule(tool="terminal", programmatic=True, kinds=("run", "run_ipython"))


def workflow_over_events(n_events: int, steps: list[tuple[int, int]]) -> Workflow:
    children = [WorkflowNode(goal=f"s{i}", level=1, span=span)
                for i, span in enumerate(steps)]
    root = WorkflowNode(goal="task", level=2, span=(0, n_events), children=children)
    return Workflow(root=root, trajectory_ref=("t", "w"),
                    config_fingerprint="", annotator_id="stub/v1")


def ui_trajectory(n: int, app: str = "Excel"):
    return trajectory([click(i, float(i), app=app) for i in range(n)])


def terminal_trajectory(n: int):
    return trajectory([event(i, float(i), "run", {"command": "ls"}) for i in range(n)])


class TestLabelTools:
    def test_run_steps_are_programmatic(self):
        t = terminal_trajectory(3)
        wf = workflow_over_events(3, [(0, 3)])
        labels = label_tools(wf, t, [RUN_RULE, APP_RULE, DEFAULT_RULE], level=1)
        assert labels[0].tool == "terminal" and labels[0].programmatic

    def test_excel_clicks_take_the_app_name(self):
        t = ui_trajectory(3, app="Excel")
        wf = workflow_over_events(3, [(0, 3)])
        labels = label_tools(wf, t, [RUN_RULE, APP_RULE, DEFAULT_RULE], level=1)
        assert labels[0].tool == "Excel" and not labels[0].programmatic

    def test_mixed_step_majority_wins(self):
        # 6 terminal events vs 4 clicks -> programmatic
        events = ([event(i, float(i), "run", {"command": "x"}) for i in range(6)]
                  + [click(6 + i, 6.0 + i, app="Excel") for i in range(4)])
        t = trajectory(events)
        wf = workflow_over_events(10, [(0, 10)])
        labels = label_tools(wf, t, [RUN_RULE, APP_RULE, DEFAULT_RULE], level=1)
        assert labels[0].programmatic
        assert labels[0].tool == "terminal"

    def test_tie_goes_to_earlier_rule(self):
        events = ([event(i, float(i), "run", {"command": "x"}) for i in range(2)]
                  + [click(2 + i, 2.0 + i, app="Excel") for i in range(2)])
        t = trajectory(events)
        wf = workflow_over_events(4, [(0, 4)])
        labels = label_tools(wf, t, [RUN_RULE, APP_RULE, DEFAULT_RULE], level=1)
        assert labels[0].tool == "terminal"  # RUN_RULE is listed first

    def test_default_rule_guarantees_totality(self):
        t = trajectory([event(0, 0.0, "think", {"text": "hm"})])
        wf = workflow_over_events(1, [(0, 1)])
        labels = label_tools(wf, t, [RUN_RULE, DEFAULT_RULE], level=1)
        assert labels[0].tool == "unknown" and not labels[0].programmatic

    def test_bundled_rules_load_and_classify(self):
        rules = load_tool_rules()
        assert rules[-1] == DEFAULT_RULE
        t = terminal_trajectory(2)
        wf = workflow_over_events(2, [(0, 2)])
        assert uses_program(wf, t, rules, level=1)
        t2 = ui_trajectory(2, app="Microsoft Excel")
        wf2 = workflow_over_events(2, [(0, 2)])
        labels = label_tools(wf2, t2, rules, level=1)
        assert labels[0].tool == "spreadsheet" and not labels[0].programmatic

    def test_arg_pattern_rule(self):
        rule = ToolRule(tool="pip", programmatic=True, kinds=("run",), arg="pip install")
        t = trajectory([event(0, 0.0, "run", {"command": "pip install numpy"})])
        wf = workflow_over_events(1, [(0, 1)])
        labels = label_tools(wf, t, [rule, DEFAULT_RULE], level=1)
        assert labels[0].tool == "pip"


class TestProgramUseRate:
    def _cohort(self, programmatic_count: int, total: int):
        items = []
        for i in range(total):
            if i < programmatic_count:
                t = terminal_trajectory(2)
            else:
                t = ui_trajectory(2)
            items.append((workflow_over_events(2, [(0, 2)]), t))
        return items

    def test_all_ui_cohort_is_zero(self):
        rules = [RUN_RULE, APP_RULE, DEFAULT_RULE]
        assert program_use_rate(self._cohort(0, 5), rules, level=1) == 0.0

    def test_fifteen_of_sixteen_is_93_75(self):
        rules = [RUN_RULE, APP_RULE, DEFAULT_RULE]
        assert program_use_rate(self._cohort(15, 16), rules, level=1) == 93.75

    def test_single_programmatic_trajectory_is_100(self):
        rules = [RUN_RULE, APP_RULE, DEFAULT_RULE]
        assert program_use_rate(self._cohort(1, 1), rules, level=1) == 100.0

    def test_empty_cohort_rejected(self):
        with pytest.raises(InputError):
            program_use_rate([], [DEFAULT_RULE])

    def test_adding_programmatic_step_is_monotone(self):
        rules = [RUN_RULE, APP_RULE, DEFAULT_RULE]
        rng = random.Random(4)
        for _ in range(20):
            total = rng.randint(1, 10)
            prog = rng.randint(0, total)
            base = program_use_rate(self._cohort(prog, total), rules, level=1)
            if prog < total:
                # convert one UI trajectory to a programmatic one
                grew = program_use_rate(self._cohort(prog + 1, total), rules, level=1)
                assert grew >= base

    def test_per_step_unit(self):
        rules = [RUN_RULE, APP_RULE, DEFAULT_RULE]
        items = [(workflow_over_events(2, [(0, 1), (1, 2)]),
                  trajectory([event(0, 0.0, "run", {"command": "x"}),
                              click(1, 1.0, app="Excel")]))]
        assert program_use_rate(items, rules, level=1, unit="step") == 50.0


def stats(worker_id, kind, task="t1", actions=10, elapsed=10.0, cost=None,
          success=None, program=None, ai_usage=None):
    return TrajectoryStats(task_id=task, worker_id=worker_id, kind=kind,
                           ai_usage=ai_usage, actions=actions,
                           elapsed_seconds=elapsed, cost_usd=cost,
                           success=success, uses_program=program)


class TestEfficiencyReport:
    def test_equal_groups_have_zero_deltas(self):
        rows = [stats("h", "human", elapsed=50.0, actions=20),
                stats("a", "agent", elapsed=50.0, actions=20)]
        report = efficiency_report(rows, reference="human")
        assert report.deltas["agent"]["time_saved_percent"] == 0.0
        assert report.deltas["agent"]["actions_saved_percent"] == 0.0

    def test_ten_vs_hundred_seconds_is_ninety_percent_less(self):
        rows = [stats("h", "human", elapsed=100.0), stats("a", "agent", elapsed=10.0)]
        report = efficiency_report(rows, reference="human")
        assert report.deltas["agent"]["time_saved_percent"] == 90.0

    def test_cost_pair_reproduces_the_formula(self):
        # 24.79 vs 0.94 dollars: 100 * (1 - 0.94/24.79) = 96.208...
        assert percent_delta(0.94, 24.79) == pytest.approx(96.2, abs=0.05)
        rows = [stats("h", "human", cost=24.79), stats("a", "agent", cost=0.94)]
        report = efficiency_report(rows, reference="human")
        assert report.deltas["agent"]["cost_saved_percent"] == \
            pytest.approx(96.2, abs=0.05)

    def test_reference_slower_gives_positive_saving(self):
        rows = [stats("h", "human", elapsed=100.0), stats("a", "agent", elapsed=10.0)]
        report = efficiency_report(rows, reference="human")
        assert report.deltas["agent"]["time_saved_percent"] > 0
        flipped = efficiency_report(rows, reference="agent")
        assert flipped.deltas["human"]["time_saved_percent"] == -900.0

    def test_missing_reference_group(self):
        with pytest.raises(InputError, match="reference"):
            efficiency_report([stats("a", "agent")], reference="human")

    def test_shared_success_filter(self):
        rows = [
            stats("h1", "human", task="t1", elapsed=100.0, success=True),
            stats("a1", "agent", task="t1", elapsed=10.0, success=True),
            stats("h2", "human", task="t2", elapsed=500.0, success=True),
            stats("a2", "agent", task="t2", elapsed=1.0, success=False),
        ]
        unfiltered = efficiency_report(rows, reference="human")
        assert unfiltered.rows[1].n == 2  # humans
        filtered = efficiency_report(rows, reference="human",
                                     only_shared_successes=True)
        by_group = {r.group: r for r in filtered.rows}
        # task t2 drops out: the agent never succeeded there
        assert by_group["human"].n == 1 and by_group["agent"].n == 1
        assert by_group["human"].mean_elapsed_seconds == 100.0

    def test_mean_of_ratios_variant(self):
        rows = [
            stats("h1", "human", task="t1", elapsed=100.0),
            stats("a1", "agent", task="t1", elapsed=10.0),   # ratio 0.1
            stats("h2", "human", task="t2", elapsed=50.0),
            stats("a2", "agent", task="t2", elapsed=25.0),   # ratio 0.5
        ]
        report = efficiency_report(rows, reference="human", ratio_of_means=False)
        assert report.deltas["agent"]["time_saved_percent"] == \
            pytest.approx(100.0 * (1 - (0.1 + 0.5) / 2))

    def test_group_means_are_permutation_invariant(self):
        rows = [stats("h1", "human", elapsed=10.0), stats("h2", "human", elapsed=30.0),
                stats("a1", "agent", elapsed=5.0)]
        fwd = efficiency_report(rows, reference="human")
        rev = efficiency_report(list(reversed(rows)), reference="human")
        assert fwd == rev

    def test_success_and_program_rates_ingested(self):
        rows = [stats("h1", "human", success=True, program=False),
                stats("h2", "human", success=False, program=True)]
        report = efficiency_report(rows, reference="human")
        row = report.rows[0]
        assert row.success_rate == 50.0
        assert row.program_use_rate == 50.0

    def test_grouping_by_ai_usage(self):
        rows = [stats("h1", "human", ai_usage="independent", elapsed=100.0),
                stats("h2", "human", ai_usage="automation", elapsed=117.7)]
        report = efficiency_report(rows, group_by="ai_usage",
                                   reference="independent")
        assert {r.group for r in report.rows} == {"independent", "automation"}


def result(matching: float, order: float | None) -> AlignmentResult:
    return AlignmentResult(matches=(), matching_percent=matching,
                           order_percent=order, level=1)


class TestAlignmentBreakdown:
    def test_single_pair_returns_its_values(self):
        rows = [(("agent", "human"), result(75.0, 100.0))]
        out = alignment_breakdown(rows)
        assert out[("agent", "human")].mean_matching_percent == 75.0
        assert out[("agent", "human")].mean_order_percent == 100.0
        assert out[("agent", "human")].n == 1

    def test_two_by_two_cohort_hand_arithmetic(self):
        rows = [
            (("agent", "human"), result(80.0, 100.0)),
            (("agent", "human"), result(60.0, 50.0)),
            (("human", "human"), result(90.0, None)),
            (("human", "human"), result(70.0, 100.0)),
        ]
        out = alignment_breakdown(rows)
        assert out[("agent", "human")].mean_matching_percent == pytest.approx(70.0)
        assert out[("agent", "human")].mean_order_percent == pytest.approx(75.0)
        # undefined order drops out of the order mean but not the match mean
        assert out[("human", "human")].mean_matching_percent == pytest.approx(80.0)
        assert out[("human", "human")].mean_order_percent == pytest.approx(100.0)

    def test_all_orders_undefined(self):
        out = alignment_breakdown([(("a", "b"), result(10.0, None))])
        assert out[("a", "b")].mean_order_percent is None
