"""Workflow quality scoring and agreement with manual labels.

Each step gets two binary verdicts from the annotator: whether its actions
are consistent with its stated goal, and whether it is modular (meaningfully
distinct from its neighbors). YES maps to 1, so higher scores are better.
Judge reliability against hand labels is quantified with Cohen's kappa.
"""

from __future__ import annotations

from dataclasses import dataclass

from .annotator import Annotator, FrameHandle
from .errors import BackendError, InputError
from .events import Trajectory, render_event
from .hierarchy import Workflow, flatten
from .segmentation import frame_handle

DEFAULT_STATE_STRIDE = 10


@dataclass(frozen=True)
class StepVerdicts:
    step_index: int
    consistency: bool
    modularity: bool


@dataclass(frozen=True)
class QualityReport:
    level: int
    per_step: tuple[StepVerdicts, ...]
    consistency_score: float  # mean of per-step indicators, YES -> 1
    modularity_score: float
    state_sample_stride: int


@dataclass(frozen=True)
class AgreementReport:
    """Two-rater agreement. ``kappa`` is None when chance agreement is 1
    (neither rater varies), a case reported explicitly rather than as a
    number."""

    kappa: float | None
    n: int
    confusion: tuple[tuple[int, int], tuple[int, int]]  # rows: rater a YES/NO

    @property
    def undefined(self) -> bool:
        return self.kappa is None


def default_judge_level(w: Workflow) -> int:
    """The top-level step tier: one below the root."""
    return max(0, w.root.level - 1)


def _sampled_states(t: Trajectory, span: tuple[int, int], stride: int
                    ) -> list[FrameHandle]:
    states = []
    for pos in range(span[0], span[1], max(1, stride)):
        handle = frame_handle(t, t.events[pos])
        if handle is not None:
            states.append(handle)
    return states


def judge_consistency(w: Workflow, t: Trajectory, annotator: Annotator,
                      level: int | None = None,
                      stride: int = DEFAULT_STATE_STRIDE
                      ) -> tuple[list[bool], float]:
    """Per-step action-goal consistency verdicts and their mean.

    Every step submits its goal, rendered actions, and every stride-th
    screenshot in its span. Steps with no actions count YES outright, per
    the judging contract.
    """
    level = default_judge_level(w) if level is None else level
    steps = flatten(w.root, level)
    verdicts: list[bool] = []
    for i, step in enumerate(steps):
        events = t.events[step.span[0]:step.span[1]]
        if not events:
            verdicts.append(True)
            continue
        try:
            verdict = annotator.judge_consistency(
                goal=step.goal,
                actions=[render_event(e) for e in events],
                states=_sampled_states(t, step.span, stride),
            )
        except BackendError as exc:
            raise type(exc)(f"consistency judgment failed at step {i}: {exc}") from exc
        verdicts.append(verdict)
    return verdicts, _mean_indicator(verdicts)


def judge_modularity(w: Workflow, annotator: Annotator,
                     level: int | None = None) -> tuple[list[bool], float]:
    """Per-step modularity verdicts and their mean.

    The full ordered goal list is passed with the focal index so the judge
    sees each step in context.
    """
    level = default_judge_level(w) if level is None else level
    goals = [step.goal for step in flatten(w.root, level)]
    verdicts: list[bool] = []
    for i in range(len(goals)):
        try:
            verdicts.append(annotator.judge_modularity(goals, i))
        except BackendError as exc:
            raise type(exc)(f"modularity judgment failed at step {i}: {exc}") from exc
    return verdicts, _mean_indicator(verdicts)


def _mean_indicator(verdicts: list[bool]) -> float:
    if not verdicts:
        return 0.0
    return sum(verdicts) / len(verdicts)


def quality_report(w: Workflow, t: Trajectory, annotator: Annotator,
                   level: int | None = None,
                   stride: int = DEFAULT_STATE_STRIDE) -> QualityReport:
    level = default_judge_level(w) if level is None else level
    consistency, c_score = judge_consistency(w, t, annotator, level, stride)
    modularity, m_score = judge_modularity(w, annotator, level)
    per_step = tuple(StepVerdicts(i, c, m)
                     for i, (c, m) in enumerate(zip(consistency, modularity)))
    return QualityReport(level=level, per_step=per_step,
                         consistency_score=c_score, modularity_score=m_score,
                         state_sample_stride=stride)


def cohens_kappa(a: list[bool], b: list[bool]) -> AgreementReport:
    """Chance-corrected agreement between two binary raters.

                  p_o - p_e
        kappa = -------------
                   1 - p_e

    with p_o the observed agreement and p_e the chance agreement from the
    raters' marginals. Computed in integer arithmetic so textbook cases
    come out exact.
    """
    if len(a) != len(b):
        raise InputError(f"label lists differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise InputError("label lists must be non-empty")
    n11 = sum(1 for x, y in zip(a, b) if x and y)
    n10 = sum(1 for x, y in zip(a, b) if x and not y)
    n01 = sum(1 for x, y in zip(a, b) if not x and y)
    n00 = len(a) - n11 - n10 - n01
    n = len(a)
    agree = n11 + n00
    # n^2 * p_e, kept integral
    chance = (n11 + n10) * (n11 + n01) + (n01 + n00) * (n10 + n00)
    denominator = n * n - chance
    kappa = None if denominator == 0 else (n * agree - chance) / denominator
    return AgreementReport(kappa=kappa, n=n, confusion=((n11, n10), (n01, n00)))
