"""Deterministic synthetic corpus for demos and end-to-end tests.

Builds six small sessions (two tasks, each done by two humans and one
agent) with tiny PNG screenshots, a corpus manifest, and an ingested
results file. Everything derives from one seed, so two builds of the same
corpus are byte-identical.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np
from PIL import Image

from .events import (EventKind, RawEvent, ScreenshotRef, Trajectory,
                     WorkerMeta, write_session)

# Base screen colors per application; the visual jumps between them are what
# boundary detection picks up.
_APP_COLORS = {
    "Excel": (0.12, 0.45, 0.20),
    "Chrome": (0.85, 0.86, 0.90),
    "PowerPoint": (0.70, 0.25, 0.15),
    "Word": (0.16, 0.30, 0.65),
    "ChatGPT": (0.95, 0.92, 0.80),
    "Terminal": (0.05, 0.05, 0.08),
}
_FRAME_SIZE = (48, 32)  # (width, height)

_WORDS = ("sales", "report", "total", "chart", "revenue", "notes", "figures",
          "average", "margin", "summary", "draft", "review")


class _SessionBuilder:
    def __init__(self, rng: random.Random, frames_dir: Path, session_dir: Path):
        self.rng = rng
        self.frames_dir = frames_dir
        self.session_dir = session_dir
        self.events: list[RawEvent] = []
        self.t = 0.0
        self.frame_count = 0

    def _advance(self, low: float, high: float) -> float:
        self.t += self.rng.uniform(low, high)
        return round(self.t, 3)

    def _shot(self, app: str) -> ScreenshotRef:
        color = _APP_COLORS[app]
        w, h = _FRAME_SIZE
        pixels = np.zeros((h, w, 3), dtype=np.float64)
        for c in range(3):
            pixels[:, :, c] = color[c]
        # a thin accent bar that drifts as the session progresses, keeping
        # within-app frame differences small but nonzero
        y = (self.frame_count * 3) % (h - 2)
        pixels[y:y + 2, :, :] = 1.0 - pixels[y:y + 2, :, :]
        self.frame_count += 1
        rel = Path("frames") / self.frames_dir.name / f"{self.frame_count:04d}.png"
        path = self.session_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray((pixels * 255).round().astype(np.uint8), "RGB").save(path)
        return ScreenshotRef(path=str(rel), frame_id=self.frame_count)

    def add(self, kind: str, args: dict[str, str], app: str | None,
            with_shot: bool = True, gap: tuple[float, float] = (2.0, 6.0)) -> None:
        shot = self._shot(app) if (with_shot and app is not None) else None
        self.events.append(RawEvent(index=len(self.events), t=self._advance(*gap),
                                    kind=EventKind.parse(kind), args=args,
                                    app=app, screenshot=shot))

    def click(self, app: str) -> None:
        self.add("click", {"x": str(self.rng.randint(10, 400)),
                           "y": str(self.rng.randint(10, 300))}, app)

    def double_click_pair(self, app: str) -> None:
        x, y = str(self.rng.randint(10, 400)), str(self.rng.randint(10, 300))
        self.add("click", {"x": x, "y": y}, app)
        self.add("click", {"x": x, "y": y}, app, gap=(0.03, 0.07))

    def typing(self, app: str, n_words: int) -> None:
        text = " ".join(self.rng.choice(_WORDS) for _ in range(n_words))
        for ch in text:
            self.add("keypress", {"text": ch}, app, gap=(0.05, 0.12))

    def scroll_burst(self, app: str, n: int) -> None:
        direction = self.rng.choice((-1, 1))
        for _ in range(n):
            self.add("scroll", {"dy": str(direction * self.rng.randint(1, 3))},
                     app, gap=(0.05, 0.2))


def _human_session(rng: random.Random, apps: list[str], builder: _SessionBuilder) -> None:
    for phase, app in enumerate(apps):
        builder.click(app)
        builder.typing(app, n_words=rng.randint(2, 4))
        builder.scroll_burst(app, n=rng.randint(2, 4))
        builder.double_click_pair(app)
        builder.click(app)
        builder.typing(app, n_words=rng.randint(1, 3))
        builder.scroll_burst(app, n=rng.randint(2, 3))
        if phase == 0:
            builder.click(app)


def _agent_session(rng: random.Random, builder: _SessionBuilder,
                   commands: list[str]) -> None:
    builder.add("think", {"text": "plan the task"}, None, with_shot=False,
                gap=(0.5, 1.5))
    for command in commands:
        builder.add("run", {"command": command}, "Terminal", gap=(0.8, 2.5))
    builder.add("edit", {"path": "out/result.md"}, "Terminal", gap=(0.8, 2.0))
    builder.add("message", {"text": "task complete"}, None, with_shot=False,
                gap=(0.3, 1.0))


_TASKS = (
    {"task_id": "sales-analysis", "skill": "data_analysis",
     "instruction": "Clean and analyze the sales data, then chart the results",
     "human_apps": ["Excel", "Chrome"],
     "agent_commands": ["python clean.py data.csv", "python analyze.py",
                        "python chart.py --out chart.png"],
     "agent_succeeds": True},
    {"task_id": "stock-analysis-slides", "skill": "data_analysis",
     "instruction": "Create and edit stock analysis presentations",
     "human_apps": ["Excel", "PowerPoint"],
     "agent_commands": ["python fetch_prices.py", "python summarize.py",
                        "python make_slides.py --out deck.pptx"],
     "agent_succeeds": False},
)


def build_corpus(out_dir: str | Path, seed: int = 7) -> Path:
    """Write the corpus under ``out_dir`` and return the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    entries = []
    results = []

    for task in _TASKS:
        workers = [
            WorkerMeta(worker_id="human-a", kind="human", ai_usage="independent",
                       cost_usd=round(rng.uniform(20.0, 28.0), 2)),
            WorkerMeta(worker_id="human-b", kind="human", ai_usage="augmentation",
                       cost_usd=round(rng.uniform(18.0, 26.0), 2)),
            WorkerMeta(worker_id="agent-oh", kind="agent", framework="openhands",
                       backbone="gpt-4o", cost_usd=round(rng.uniform(0.6, 2.5), 2)),
        ]
        for worker in workers:
            stem = f"{task['task_id']}__{worker.worker_id}"
            builder = _SessionBuilder(rng, frames_dir=Path(stem), session_dir=out)
            if worker.kind == "human":
                apps = list(task["human_apps"])
                if worker.ai_usage == "augmentation":
                    apps.append("ChatGPT")
                _human_session(rng, apps, builder)
            else:
                _agent_session(rng, builder, list(task["agent_commands"]))
            trailing_idle = rng.uniform(5.0, 30.0) if worker.kind == "human" \
                else rng.uniform(0.5, 3.0)
            trajectory = Trajectory(
                task_id=task["task_id"], worker=worker,
                events=tuple(builder.events),
                elapsed_seconds=round(builder.t + trailing_idle, 3),
                provenance="synthetic corpus",
            )
            session_path = out / f"{stem}.jsonl"
            write_session(trajectory, session_path)
            entries.append({
                "path": session_path.name,
                "task_id": task["task_id"],
                "skill": task["skill"],
                "instruction": task["instruction"],
                "worker": {k: v for k, v in (
                    ("worker_id", worker.worker_id), ("kind", worker.kind),
                    ("framework", worker.framework), ("backbone", worker.backbone),
                    ("ai_usage", worker.ai_usage), ("cost_usd", worker.cost_usd),
                ) if v is not None},
            })
            success = worker.kind == "human" or task["agent_succeeds"]
            results.append({"task_id": task["task_id"],
                            "worker_id": worker.worker_id, "success": success})

    (out / "results.json").write_text(
        json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    manifest_path = out / "manifest.json"
    manifest_path.write_text(
        json.dumps({"trajectories": entries, "results": "results.json"},
                   indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest_path


def main(argv: list[str] | None = None) -> None:
    import argparse

    parser = argparse.ArgumentParser(description="Build the synthetic demo corpus")
    parser.add_argument("out_dir", help="directory to write the corpus into")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)
    manifest = build_corpus(args.out_dir, seed=args.seed)
    print(manifest)


if __name__ == "__main__":
    main()
