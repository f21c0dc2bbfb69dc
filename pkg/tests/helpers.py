"""Shared builders for tests: events, trajectories, frame files."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from workmine.events import (EventKind, RawEvent, ScreenshotRef, Trajectory,
                             WorkerMeta)


def event(i: int, t: float, kind: str, args: dict | None = None,
          app: str | None = None, shot: ScreenshotRef | None = None) -> RawEvent:
    return RawEvent(index=i, t=float(t), kind=EventKind.parse(kind),
                    args=args or {}, app=app, screenshot=shot)


def keypress(i: int, t: float, text: str, app: str | None = None,
             shot: ScreenshotRef | None = None) -> RawEvent:
    return event(i, t, "keypress", {"text": text}, app, shot)


def click(i: int, t: float, x: int = 100, y: int = 100,
          app: str | None = None, shot: ScreenshotRef | None = None) -> RawEvent:
    return event(i, t, "click", {"x": str(x), "y": str(y)}, app, shot)


def scroll(i: int, t: float, dy: int, app: str | None = None) -> RawEvent:
    return event(i, t, "scroll", {"dy": str(dy)}, app)


def trajectory(events, task_id: str = "task-1", worker: WorkerMeta | None = None,
               elapsed: float | None = None, root: Path | None = None) -> Trajectory:
    worker = worker or WorkerMeta(worker_id="w1", kind="human")
    if elapsed is None:
        elapsed = events[-1].t if events else 0.0
    return Trajectory(task_id=task_id, worker=worker, events=tuple(events),
                      elapsed_seconds=float(elapsed), root=root)


def write_frame(path: Path, color: tuple[float, float, float],
                size: tuple[int, int] = (16, 12),
                accent_row: int | None = None) -> Path:
    """Solid-color PNG with an optional inverted accent row."""
    w, h = size
    arr = np.zeros((h, w, 3), dtype=np.float64)
    arr[:] = color
    if accent_row is not None:
        arr[accent_row % h] = 1.0 - arr[accent_row % h]
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray((arr * 255).round().astype(np.uint8), "RGB").save(path)
    return path


def screencast_trajectory(tmp_path: Path, n_events: int,
                          cut_positions: tuple[int, ...] = (),
                          app_for_cut: bool = False) -> Trajectory:
    """Static screencast with full-frame scene cuts at the given positions.

    Every event carries a screenshot; frames are identical except that the
    base color flips between black and white at each cut.
    """
    frames_dir = tmp_path / "frames"
    events = []
    palette = ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    color_idx = 0
    apps = ("Chrome", "VSCode", "Finder", "Excel", "Word", "Terminal")
    app_idx = 0
    for pos in range(n_events):
        if pos in cut_positions:
            color_idx = 1 - color_idx
            app_idx += 1
        rel = f"frames/{pos:04d}.png"
        write_frame(tmp_path / rel, palette[color_idx])
        app = apps[app_idx % len(apps)] if app_for_cut else "Chrome"
        events.append(click(pos, float(pos), app=app,
                            shot=ScreenshotRef(path=rel, frame_id=pos)))
    return trajectory(events, root=tmp_path)
