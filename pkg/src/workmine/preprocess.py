"""Cleanup passes for raw recorded sessions.

Recorders emit one event per physical input, so a typed sentence arrives as
dozens of single-character keypresses and a long scroll as many one-notch
events. These passes collapse such runs and pair rapid clicks into double
clicks, shrinking sessions by an order of magnitude without losing content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InputError
from .events import EventKind, RawEvent, ScreenshotRef, Trajectory, with_events

PROVENANCE_NOTE = "preprocessed(double_click,keypress,scroll)"


@dataclass(frozen=True)
class PreprocessConfig:
    double_click_window: float = 0.1  # seconds; "within" is inclusive
    double_click_radius: float | None = 5.0  # pixels; None = unbounded
    keypress_gap_limit: float | None = None  # seconds; None = unbounded
    scroll_direction_sensitive: bool = False

    def __post_init__(self) -> None:
        if not (self.double_click_window > 0):
            raise InputError("double_click_window must be positive")
        if self.double_click_radius is not None and self.double_click_radius < 0:
            raise InputError("double_click_radius must be >= 0 or unbounded")
        if self.keypress_gap_limit is not None and self.keypress_gap_limit < 0:
            raise InputError("keypress_gap_limit must be >= 0 or unbounded")


@dataclass(frozen=True)
class ReductionStats:
    events_before: int
    events_after: int

    @property
    def reduction_fraction(self) -> float:
        return 1.0 - self.events_after / self.events_before


# Comparisons against the pairing window and gap limit tolerate float
# representation noise (1.1 - 1.0 > 0.1 in binary), far below the 1 ms
# resolution that should flip a decision.
_TIME_EPS = 1e-9


def _reindex(events: list[RawEvent]) -> tuple[RawEvent, ...]:
    return tuple(replace(e, index=i) for i, e in enumerate(events))


def _last_screenshot(run: list[RawEvent]) -> ScreenshotRef | None:
    for e in reversed(run):
        if e.screenshot is not None:
            return e.screenshot
    return None


def _parse_float(text: str | None) -> float:
    if text is None:
        return 0.0
    try:
        return float(text)
    except ValueError:
        return 0.0


def _format_delta(value: float) -> str:
    if math.isfinite(value) and value == int(value):
        return str(int(value))
    return repr(value)


def merge_keypress_runs(events: list[RawEvent] | tuple[RawEvent, ...],
                        cfg: PreprocessConfig) -> tuple[RawEvent, ...]:
    """Collapse each maximal run of consecutive keypress events into one.

    The merged event concatenates the typed text in order, keeps the first
    event's timestamp (action onset) and the run's last screenshot
    (completed state). A gap above ``keypress_gap_limit`` breaks a run.
    """
    out: list[RawEvent] = []
    run: list[RawEvent] = []

    def flush() -> None:
        if not run:
            return
        if len(run) == 1:
            out.append(run[0])
        else:
            first = run[0]
            text = "".join(e.args.get("text", "") for e in run)
            out.append(replace(first, args={**first.args, "text": text},
                               screenshot=_last_screenshot(run)))
        run.clear()

    for e in events:
        if e.kind.name == "keypress":
            if run and cfg.keypress_gap_limit is not None \
                    and e.t - run[-1].t > cfg.keypress_gap_limit + _TIME_EPS:
                flush()
            run.append(e)
        else:
            flush()
            out.append(e)
    flush()
    return _reindex(out)


def merge_scroll_runs(events: list[RawEvent] | tuple[RawEvent, ...],
                      cfg: PreprocessConfig) -> tuple[RawEvent, ...]:
    """Collapse consecutive scroll events, summing their signed deltas.

    The gap limit is shared with keypress merging. With
    ``scroll_direction_sensitive``, a sign flip on the primary axis
    (vertical when any vertical movement is involved, else horizontal)
    breaks the run; zero deltas are compatible with either direction.
    """
    out: list[RawEvent] = []
    run: list[RawEvent] = []

    def flush() -> None:
        if not run:
            return
        if len(run) == 1:
            out.append(run[0])
        else:
            first = run[0]
            args = dict(first.args)
            for axis in ("dx", "dy"):
                if any(axis in e.args for e in run):
                    args[axis] = _format_delta(sum(_parse_float(e.args.get(axis)) for e in run))
            out.append(replace(first, args=args, screenshot=_last_screenshot(run)))
        run.clear()

    def breaks_direction(e: RawEvent) -> bool:
        if not cfg.scroll_direction_sensitive or not run:
            return False
        run_dy = sum(_parse_float(r.args.get("dy")) for r in run)
        new_dy = _parse_float(e.args.get("dy"))
        if run_dy != 0.0 or new_dy != 0.0:
            return run_dy * new_dy < 0
        run_dx = sum(_parse_float(r.args.get("dx")) for r in run)
        new_dx = _parse_float(e.args.get("dx"))
        return run_dx * new_dx < 0

    for e in events:
        if e.kind.name == "scroll":
            gap_break = run and cfg.keypress_gap_limit is not None \
                and e.t - run[-1].t > cfg.keypress_gap_limit + _TIME_EPS
            if gap_break or breaks_direction(e):
                flush()
            run.append(e)
        else:
            flush()
            out.append(e)
    flush()
    return _reindex(out)


def _click_distance(a: RawEvent, b: RawEvent) -> float | None:
    if not all(k in e.args for e in (a, b) for k in ("x", "y")):
        return None
    return math.hypot(_parse_float(a.args["x"]) - _parse_float(b.args["x"]),
                      _parse_float(a.args["y"]) - _parse_float(b.args["y"]))


def detect_double_clicks(events: list[RawEvent] | tuple[RawEvent, ...],
                         cfg: PreprocessConfig) -> tuple[RawEvent, ...]:
    """Greedily pair adjacent clicks within the time window into double clicks.

    The pair must land within ``double_click_radius`` pixels of each other
    (unbounded radius pairs on timing alone; with a finite radius, clicks
    lacking coordinates never pair). A produced double_click is not
    eligible for further pairing, so three rapid clicks yield a
    double_click plus a click.
    """
    out: list[RawEvent] = []
    i = 0
    n = len(events)
    while i < n:
        a = events[i]
        if a.kind.name == "click" and i + 1 < n and events[i + 1].kind.name == "click":
            b = events[i + 1]
            close_in_time = b.t - a.t <= cfg.double_click_window + _TIME_EPS
            if cfg.double_click_radius is None:
                close_in_space = True
            else:
                dist = _click_distance(a, b)
                close_in_space = dist is not None and dist <= cfg.double_click_radius
            if close_in_time and close_in_space:
                out.append(replace(a, kind=EventKind("double_click"),
                                   screenshot=b.screenshot or a.screenshot))
                i += 2
                continue
        out.append(a)
        i += 1
    return _reindex(out)


def preprocess(t: Trajectory, cfg: PreprocessConfig | None = None
               ) -> tuple[Trajectory, ReductionStats]:
    """Run all cleanup passes and report how much the session shrank.

    Double-click detection runs first so click timing is judged on raw
    events, then keypress and scroll merging. Idempotent: a second
    application returns an identical trajectory.
    """
    cfg = cfg or PreprocessConfig()
    events = detect_double_clicks(t.events, cfg)
    events = merge_keypress_runs(events, cfg)
    events = merge_scroll_runs(events, cfg)
    stats = ReductionStats(events_before=len(t.events), events_after=len(events))
    return with_events(t, events, provenance_note=PROVENANCE_NOTE), stats
