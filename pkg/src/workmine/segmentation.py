"""Split a session into steps at visual transitions, then re-join neighbors
that stay inside the same software.

Boundary detection compares consecutive screenshots by mean squared error:
a large shift (switching applications, opening a document) starts a new
segment. Because pixel change alone over-splits (zooms, scrolls), adjacent
segments are merged back when the annotator judges both sides to be in the
same software.

Segment spans are positions in the trajectory's event sequence, not the
events' recorded ``index`` values (which need not start at zero).
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

from .annotator import Annotator, FrameHandle
from .errors import BackendError, InputError, InvariantViolation
from .events import RawEvent, Trajectory, render_event
from .frames import Frame, frame_mse, load_frame


@dataclass(frozen=True)
class BoundaryPolicy:
    """How a screen change becomes a step boundary.

    Adaptive mode thresholds at mean + k * std of the session's own MSE
    series, which tracks sessions with very different screen dynamics;
    absolute mode is available for reproducible sweeps.
    """

    mode: str = "adaptive"  # "adaptive" | "absolute"
    k: float = 2.0
    threshold: float | None = None
    downscale: int = 1  # compare frames at 1/n resolution
    allow_mixed_sizes: bool = False  # resize to a common size instead of erroring

    def __post_init__(self) -> None:
        if self.mode == "absolute":
            if self.threshold is None or not (0.0 < self.threshold <= 1.0):
                raise InputError("absolute mode needs a threshold in (0, 1]")
        elif self.mode == "adaptive":
            if not (self.k > 0):
                raise InputError("adaptive mode needs k > 0")
        else:
            raise InputError(f"unknown boundary mode {self.mode!r}")
        if self.downscale < 1:
            raise InputError("downscale factor must be >= 1")


@dataclass(frozen=True)
class Segment:
    start: int  # event position, inclusive
    end: int  # event position, exclusive
    boundary_cause: str = "visual"  # "visual" | "session_start"
    merged_from: int = 1

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise InputError(f"empty or inverted segment [{self.start}, {self.end})")


def frame_handle(t: Trajectory, event: RawEvent) -> FrameHandle | None:
    """Resolvable screenshot of an event, as an annotator frame handle."""
    if event.screenshot is None:
        return None
    path = event.screenshot.resolve(t.root)
    if not path.is_file():
        return None
    return FrameHandle(str(path))


def _prepared_frame(t: Trajectory, event: RawEvent, policy: BoundaryPolicy) -> Frame | None:
    handle = frame_handle(t, event)
    if handle is None:
        return None
    return load_frame(handle.path).downscaled(policy.downscale)


def mse_series(t: Trajectory, policy: BoundaryPolicy | None = None
               ) -> list[tuple[int, float]]:
    """(event position, MSE to the previous screenshot) for each
    screenshot-bearing event after the first readable one."""
    policy = policy or BoundaryPolicy()
    series: list[tuple[int, float]] = []
    prev: Frame | None = None
    for pos, event in enumerate(t.events):
        frame = _prepared_frame(t, event, policy)
        if frame is None:
            continue
        if prev is not None:
            a, b = prev, frame
            if a.size != b.size:
                if not policy.allow_mixed_sizes:
                    raise InputError(
                        f"frame size changes at event position {pos} "
                        f"({a.size} -> {b.size}); set allow_mixed_sizes to resize")
                w, h = min(a.width, b.width), min(a.height, b.height)
                a, b = a.resized(w, h), b.resized(w, h)
            series.append((pos, frame_mse(a, b)))
        prev = frame
    return series


def detect_boundaries(t: Trajectory, policy: BoundaryPolicy | None = None) -> list[int]:
    """Positions of events that open a new segment (position 0 is an
    implicit boundary and is never listed).

    Sessions with fewer than two readable frames produce no boundaries.
    """
    policy = policy or BoundaryPolicy()
    series = mse_series(t, policy)
    if not series:
        return []
    values = [v for _, v in series]
    if policy.mode == "absolute":
        cut = policy.threshold
    else:
        cut = statistics.fmean(values) + policy.k * statistics.pstdev(values)
    return sorted({pos for pos, v in series if v > cut and pos > 0})


def segments_from_boundaries(n_events: int, boundaries: list[int]) -> list[Segment]:
    if n_events < 1:
        raise InputError("cannot segment an empty trajectory")
    cuts = [0] + sorted({b for b in boundaries if 0 < b < n_events}) + [n_events]
    return [Segment(start=s, end=e,
                    boundary_cause="session_start" if s == 0 else "visual")
            for s, e in zip(cuts, cuts[1:])]


def check_partition(segments: list[Segment], n_events: int) -> None:
    """Loud structural check: contiguous, disjoint, exhaustive."""
    if not segments:
        raise InvariantViolation("segment list is empty")
    if segments[0].start != 0 or segments[-1].end != n_events:
        raise InvariantViolation(
            f"segments cover [{segments[0].start}, {segments[-1].end}), "
            f"expected [0, {n_events})")
    for left, right in zip(segments, segments[1:]):
        if left.end != right.start:
            raise InvariantViolation(
                f"gap or overlap between segments at {left.end} vs {right.start}")


def _dominant_app(t: Trajectory, seg: Segment) -> str | None:
    counts: dict[str, int] = {}
    order: dict[str, int] = {}
    for pos in range(seg.start, seg.end):
        app = t.events[pos].app
        if app is not None:
            counts[app] = counts.get(app, 0) + 1
            order.setdefault(app, pos)
    if not counts:
        return None
    return max(counts, key=lambda app: (counts[app], -order[app]))


def _edge_frame(t: Trajectory, seg: Segment, last: bool) -> FrameHandle | None:
    positions = range(seg.end - 1, seg.start - 1, -1) if last else range(seg.start, seg.end)
    for pos in positions:
        handle = frame_handle(t, t.events[pos])
        if handle is not None:
            return handle
    return None


def _segment_actions(t: Trajectory, seg: Segment) -> list[str]:
    return [render_event(e) for e in t.events[seg.start:seg.end]]


def semantic_merge(t: Trajectory, segments: list[Segment],
                   annotator: Annotator) -> list[Segment]:
    """Merge adjacent segments the annotator judges to share one software.

    The judged evidence is the pair of frames nearest the boundary (left
    segment's last, right segment's first) plus both action transcripts.
    Scans left to right, a merged segment is immediately compared with its
    new right neighbor, and passes repeat until one merges nothing.
    """
    check_partition(segments, len(t.events))
    current = list(segments)
    changed = True
    while changed:
        changed = False
        out: list[Segment] = []
        pending = current[0]
        for right in current[1:]:
            try:
                same = annotator.judge_same_software(
                    frame_a=_edge_frame(t, pending, last=True),
                    frame_b=_edge_frame(t, right, last=False),
                    actions_a=_segment_actions(t, pending),
                    actions_b=_segment_actions(t, right),
                    app_a=_dominant_app(t, pending),
                    app_b=_dominant_app(t, right),
                )
            except BackendError as exc:
                raise BackendError(
                    f"semantic merge failed on segments "
                    f"[{pending.start},{pending.end}) / [{right.start},{right.end}): {exc}"
                ) from exc
            if same:
                pending = Segment(start=pending.start, end=right.end,
                                  boundary_cause=pending.boundary_cause,
                                  merged_from=pending.merged_from + right.merged_from)
                changed = True
            else:
                out.append(pending)
                pending = right
        out.append(pending)
        current = out
    return current


def segment(t: Trajectory, policy: BoundaryPolicy | None = None,
            annotator: Annotator | None = None) -> list[Segment]:
    """Full segmentation: visual boundaries, then semantic merging.

    Without an annotator only the visual stage runs. The result always
    partitions the event range.
    """
    policy = policy or BoundaryPolicy()
    boundaries = detect_boundaries(t, policy)
    segments = segments_from_boundaries(len(t.events), boundaries)
    if annotator is not None:
        segments = semantic_merge(t, segments, annotator)
    check_partition(segments, len(t.events))
    return segments
