"""Deterministic rule-based backend for offline runs and tests.

Answers are produced as plain transcripts ("YES", a phrase, a JSON pair
list) so the shared response parser is exercised on every path. Every rule
is a pure function of the request.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from ..events import FREE_TEXT_KINDS
from ..frames import histogram_distance, load_frame
from ..errors import InputError
from .base import AnnotatorRequest, FrameHandle

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_NUMERIC_RE = re.compile(r"^\d+$")

# Verb and fallback object used to phrase a goal for each action kind.
_VERB_OBJECT = {
    "click": ("click", "element"),
    "right_click": ("right-click", "element"),
    "double_click": ("double-click", "element"),
    "keypress": ("type", "text"),
    "scroll": ("scroll", "page"),
    "zoom": ("zoom", "view"),
    "noop": ("pause", "briefly"),
    "browse_interactive": ("browse", "page"),
    "run": ("run", "command"),
    "run_ipython": ("run", "notebook cell"),
    "edit": ("edit", "file"),
    "read": ("read", "file"),
    "create": ("create", "file"),
    "search": ("search", "web"),
    "search_image": ("search", "images"),
    "open_image": ("open", "image"),
    "generate_image": ("generate", "image"),
    "think": ("reason", "about the task"),
    "message": ("message", "user"),
    "task_tracking": ("update", "task list"),
    "reset_environment": ("reset", "environment"),
}


def tokenize(text: str) -> set[str]:
    return set(_TOKEN_RE.findall(text.lower()))


def token_overlap(a: str, b: str) -> float:
    """Overlap coefficient of the two texts' token sets: |A∩B| / min(|A|,|B|)."""
    ta, tb = tokenize(a), tokenize(b)
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / min(len(ta), len(tb))


def token_jaccard(a: str, b: str) -> float:
    ta, tb = tokenize(a), tokenize(b)
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def _normalize_goal(goal: str) -> str:
    return " ".join(_TOKEN_RE.findall(goal.lower()))


def _most_frequent(items: list[str]) -> str | None:
    """Most frequent item; ties broken by first occurrence."""
    if not items:
        return None
    counts: dict[str, int] = {}
    for item in items:
        counts[item] = counts.get(item, 0) + 1
    best = max(counts.items(), key=lambda kv: (kv[1], -items.index(kv[0])))
    return best[0]


@dataclass
class StubBackend:
    """Fixed thresholds tuned for readable, predictable behavior offline."""

    tau_histogram: float = 0.25  # same-software screen similarity
    tau_consistency: float = 0.2  # goal/action token overlap
    tau_match: float = 0.5  # goal Jaccard for step matching

    name: str = "stub"

    def complete(self, request: AnnotatorRequest) -> str:
        handler = getattr(self, f"_{request.kind}")
        return handler(request.payload)

    def _same_software(self, p: dict) -> str:
        app_a, app_b = p["app_a"], p["app_b"]
        if app_a is not None and app_b is not None:
            return "YES" if app_a.casefold() == app_b.casefold() else "NO"
        fa, fb = p["frame_a"], p["frame_b"]
        if isinstance(fa, FrameHandle) and isinstance(fb, FrameHandle):
            try:
                distance = histogram_distance(load_frame(fa.path), load_frame(fb.path))
            except InputError:
                return "NO"
            return "YES" if distance < self.tau_histogram else "NO"
        return "NO"

    def _summarize_goal(self, p: dict) -> str:
        if "child_goals" in p:
            return "; ".join(p["child_goals"])
        dominant = _most_frequent(list(p["kinds"])) or "noop"
        verb, obj = _VERB_OBJECT.get(dominant, (dominant.replace("_", " "), ""))
        if dominant not in FREE_TEXT_KINDS:
            tokens = [tok
                      for kind, text in zip(p["kinds"], p["arg_values"])
                      if kind == dominant
                      for tok in _TOKEN_RE.findall(text.lower())
                      if not _NUMERIC_RE.match(tok)]
            mined = _most_frequent(tokens)
            if mined:
                obj = mined
        phrase = f"{verb} {obj}".strip()
        if p["app"]:
            phrase = f"{phrase} in {p['app']}"
        return phrase

    def _consistency(self, p: dict) -> str:
        if not p["actions"]:
            return "YES"
        action_text = " ".join(p["actions"])
        return "YES" if token_overlap(p["goal"], action_text) >= self.tau_consistency else "NO"

    def _modularity(self, p: dict) -> str:
        goals = p["goals"]
        focal = p["focal_index"]
        norm = _normalize_goal(goals[focal])
        for neighbor in (focal - 1, focal + 1):
            if 0 <= neighbor < len(goals) and _normalize_goal(goals[neighbor]) == norm:
                return "NO"
        return "YES"

    def _match_steps(self, p: dict) -> str:
        goals_a, goals_b = p["goals_a"], p["goals_b"]
        scored = []
        for i, ga in enumerate(goals_a):
            for j, gb in enumerate(goals_b):
                score = token_jaccard(ga, gb)
                if score >= self.tau_match:
                    scored.append((-score, i, j))
        scored.sort()
        used_a: set[int] = set()
        used_b: set[int] = set()
        pairs = []
        for _, i, j in scored:
            if i in used_a or j in used_b:
                continue
            used_a.add(i)
            used_b.add(j)
            pairs.append((i, j))
        pairs.sort()
        doc = {"pairs": [{"a": [i, i], "b": [j, j]} for i, j in pairs]}
        return json.dumps(doc)
