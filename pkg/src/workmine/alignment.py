"""Matching steps between two workflows and scoring their alignment.

A match pairs a contiguous interval of steps on one side with an interval
on the other (intervals are inclusive, so a single step is ``[i, i]``).
Two metrics summarize a match set: matching steps, the share of both
workflows' steps covered by any match, and order preservation, the share
of matches in a largest subset whose connecting lines would not cross.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Any, Iterable

from .annotator import Annotator
from .errors import BackendError, InputError
from .hierarchy import Workflow, flatten

logger = logging.getLogger(__name__)

UNDEFINED_ORDER = None  # order preservation needs at least two matches


@dataclass(frozen=True)
class StepMatch:
    a_start: int
    a_end: int  # inclusive
    b_start: int
    b_end: int  # inclusive
    source: str = "annotator"  # "annotator" | "manual"

    def __post_init__(self) -> None:
        if self.a_start > self.a_end or self.b_start > self.b_end:
            raise InputError(f"inverted match interval {self.key()}")
        if self.a_start < 0 or self.b_start < 0:
            raise InputError(f"negative step index in match {self.key()}")

    def key(self) -> tuple[int, int, int, int]:
        return (self.a_start, self.a_end, self.b_start, self.b_end)

    @property
    def a_size(self) -> int:
        return self.a_end - self.a_start + 1

    @property
    def b_size(self) -> int:
        return self.b_end - self.b_start + 1


@dataclass(frozen=True)
class AlignmentResult:
    matches: tuple[StepMatch, ...]
    matching_percent: float
    order_percent: float | None  # None when fewer than two matches
    level: int


def validate_matches(matches: Iterable[StepMatch], n_a: int | None = None,
                     n_b: int | None = None) -> None:
    """Raise InputError on out-of-range intervals or double-covered steps."""
    seen_a: set[int] = set()
    seen_b: set[int] = set()
    for m in matches:
        if n_a is not None and m.a_end >= n_a:
            raise InputError(f"match {m.key()} exceeds workflow A ({n_a} steps)")
        if n_b is not None and m.b_end >= n_b:
            raise InputError(f"match {m.key()} exceeds workflow B ({n_b} steps)")
        for i in range(m.a_start, m.a_end + 1):
            if i in seen_a:
                raise InputError(f"A step {i} appears in more than one match")
            seen_a.add(i)
        for j in range(m.b_start, m.b_end + 1):
            if j in seen_b:
                raise InputError(f"B step {j} appears in more than one match")
            seen_b.add(j)


def propose_matches(wf_a: Workflow, wf_b: Workflow, annotator: Annotator,
                    level: int | None = None) -> list[StepMatch]:
    """Ask the annotator to pair steps, then normalize its proposals.

    Proposals referencing out-of-range steps are dropped with a warning;
    when proposals overlap, the earlier-proposed one wins.
    """
    if level is None:
        level = min(max(0, wf_a.root.level - 1), max(0, wf_b.root.level - 1))
    goals_a = [s.goal for s in flatten(wf_a.root, level)]
    goals_b = [s.goal for s in flatten(wf_b.root, level)]
    try:
        pairs = annotator.propose_step_matches(goals_a, goals_b)
    except BackendError as exc:
        raise type(exc)(f"step matching failed for "
                        f"{wf_a.trajectory_ref} vs {wf_b.trajectory_ref}: {exc}") from exc
    accepted: list[StepMatch] = []
    seen_a: set[int] = set()
    seen_b: set[int] = set()
    for (a_start, a_end), (b_start, b_end) in pairs:
        if not (0 <= a_start <= a_end < len(goals_a)
                and 0 <= b_start <= b_end < len(goals_b)):
            logger.warning("dropping out-of-range match proposal a=[%d,%d] b=[%d,%d]",
                           a_start, a_end, b_start, b_end)
            continue
        a_steps = set(range(a_start, a_end + 1))
        b_steps = set(range(b_start, b_end + 1))
        if a_steps & seen_a or b_steps & seen_b:
            logger.warning("dropping overlapping match proposal a=[%d,%d] b=[%d,%d]",
                           a_start, a_end, b_start, b_end)
            continue
        seen_a |= a_steps
        seen_b |= b_steps
        accepted.append(StepMatch(a_start, a_end, b_start, b_end))
    accepted.sort(key=StepMatch.key)
    return accepted


@dataclass(frozen=True)
class MatchOverrides:
    """Manual edits to a proposed match set: removals first, then additions."""

    remove: tuple[tuple[int, int, int, int], ...] = ()
    add: tuple[StepMatch, ...] = ()

    @classmethod
    def from_doc(cls, doc: Any, where: str = "<overrides>") -> "MatchOverrides":
        if not isinstance(doc, dict):
            raise InputError(f"{where}: overrides must be an object")
        remove = tuple(tuple(_interval_pair(entry, where)) for entry in doc.get("remove", []))
        add = tuple(StepMatch(*_interval_pair(entry, where), source="manual")
                    for entry in doc.get("add", []))
        return cls(remove=remove, add=add)


def _interval_pair(entry: Any, where: str) -> tuple[int, int, int, int]:
    if (isinstance(entry, dict)
            and isinstance(entry.get("a"), list) and len(entry["a"]) == 2
            and isinstance(entry.get("b"), list) and len(entry["b"]) == 2):
        return (int(entry["a"][0]), int(entry["a"][1]),
                int(entry["b"][0]), int(entry["b"][1]))
    raise InputError(f'{where}: match entry must look like {{"a": [s, e], "b": [s, e]}}')


def apply_manual_refinement(matches: list[StepMatch], overrides: MatchOverrides,
                            n_a: int | None = None,
                            n_b: int | None = None) -> list[StepMatch]:
    """Apply manual deletions and additions, re-validating the result.

    A replacement is a removal plus an addition. Edited entries carry
    source "manual".
    """
    removals = set(overrides.remove)
    result = [m for m in matches if m.key() not in removals]
    missing = removals - {m.key() for m in matches}
    for key in sorted(missing):
        logger.warning("override removes a match that is not present: %s", key)
    result.extend(overrides.add)
    result.sort(key=StepMatch.key)
    validate_matches(result, n_a, n_b)
    return result


def _longest_increasing(values: list[int]) -> int:
    """Length of the longest strictly increasing subsequence."""
    best: list[int] = []
    for v in values:
        best.append(1 + max((best[i] for i in range(len(best)) if values[i] < v),
                            default=0))
    return max(best, default=0)


def compute_metrics(matches: list[StepMatch], n_a: int, n_b: int,
                    level: int = 0) -> AlignmentResult:
    """Coverage and order metrics for a validated match set.

    Order preservation counts the largest non-crossing subset, found as the
    longest strictly increasing run of B starts after sorting by A starts
    (interval matches are disjoint, so starts order whole intervals).
    """
    if n_a < 1 or n_b < 1:
        raise InputError("both workflows must have at least one step")
    validate_matches(matches, n_a, n_b)
    covered = sum(m.a_size + m.b_size for m in matches)
    matching_percent = 100.0 * covered / (n_a + n_b)
    if len(matches) >= 2:
        ordered = sorted(matches, key=lambda m: m.a_start)
        order_percent = 100.0 * _longest_increasing(
            [m.b_start for m in ordered]) / len(matches)
    else:
        order_percent = UNDEFINED_ORDER
    return AlignmentResult(matches=tuple(matches),
                           matching_percent=matching_percent,
                           order_percent=order_percent, level=level)


def align(wf_a: Workflow, wf_b: Workflow, annotator: Annotator,
          level: int | None = None,
          overrides: MatchOverrides | None = None) -> AlignmentResult:
    """Propose, optionally hand-refine, and score matches in one call."""
    if level is None:
        level = min(max(0, wf_a.root.level - 1), max(0, wf_b.root.level - 1))
    n_a = len(flatten(wf_a.root, level))
    n_b = len(flatten(wf_b.root, level))
    matches = propose_matches(wf_a, wf_b, annotator, level)
    if overrides is not None:
        matches = apply_manual_refinement(matches, overrides, n_a, n_b)
    return compute_metrics(matches, n_a, n_b, level)


def progress(agent_wf: Workflow, reference_wf: Workflow,
             matches: list[StepMatch], level: int) -> float:
    """Percent of the agent's actions spent up to its farthest matched step.

    ``matches`` must have the agent workflow on the A side and the
    reference on the B side; 0 when nothing matched.
    """
    agent_steps = flatten(agent_wf.root, level)
    reference_steps = flatten(reference_wf.root, level)
    validate_matches(matches, len(agent_steps), len(reference_steps))
    if not matches:
        return 0.0
    farthest = max(m.a_end for m in matches)
    events_through = agent_steps[farthest].span[1]
    total = agent_wf.root.span[1] - agent_wf.root.span[0]
    return 100.0 * events_through / total


# --- (de)serialization --------------------------------------------------------

def match_doc(m: StepMatch) -> dict:
    return {"a": [m.a_start, m.a_end], "b": [m.b_start, m.b_end],
            "source": m.source}


def match_from_doc(doc: Any, where: str = "<match>") -> StepMatch:
    interval = _interval_pair(doc, where)
    source = doc.get("source", "annotator") if isinstance(doc, dict) else "annotator"
    return StepMatch(*interval, source=str(source))


def result_to_doc(r: AlignmentResult) -> dict:
    return {
        "level": r.level,
        "matching_percent": r.matching_percent,
        "order_percent": r.order_percent,
        "matches": [match_doc(m) for m in r.matches],
    }


def result_from_doc(doc: Any, where: str = "<alignment>") -> AlignmentResult:
    if not isinstance(doc, dict) or not isinstance(doc.get("matches"), list):
        raise InputError(f"{where}: alignment document must carry a match list")
    matches = tuple(match_from_doc(m, where) for m in doc["matches"])
    return AlignmentResult(matches=matches,
                           matching_percent=float(doc.get("matching_percent", 0.0)),
                           order_percent=doc.get("order_percent"),
                           level=int(doc.get("level", 0)))


def load_overrides(path: str) -> MatchOverrides:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read overrides file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed overrides JSON: {exc.msg}") from None
    return MatchOverrides.from_doc(doc, where=path)
