"""Request/response types and transcript parsing for annotator backends.

Every judgment the toolkit delegates (screen comparison, goal summaries,
step quality verdicts, step matching) flows through one request shape, so
backends stay interchangeable and responses cache uniformly.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass
from typing import Any, Callable, Protocol, runtime_checkable

from ..errors import AnnotatorParseError, InputError

REQUEST_KINDS = ("same_software", "summarize_goal", "consistency",
                 "modularity", "match_steps")

# Required payload keys per request kind. summarize_goal accepts two
# shapes: action-level (leaf steps) and child-goal roll-up (parents).
_PAYLOAD_KEYS = {
    "same_software": {"frame_a", "frame_b", "actions_a", "actions_b", "app_a", "app_b"},
    "consistency": {"goal", "actions", "states"},
    "modularity": {"goals", "focal_index"},
    "match_steps": {"goals_a", "goals_b"},
}
_SUMMARIZE_LEAF_KEYS = {"actions", "kinds", "arg_values", "app", "state"}
_SUMMARIZE_PARENT_KEYS = {"child_goals"}


@dataclass(frozen=True)
class FrameHandle:
    """A screenshot pinned by file path; hashed by file content for caching."""

    path: str


@dataclass(frozen=True)
class AnnotatorRequest:
    kind: str
    payload: dict
    prompt_version: str

    def __post_init__(self) -> None:
        if self.kind not in REQUEST_KINDS:
            raise InputError(f"unknown annotator request kind {self.kind!r}")
        keys = set(self.payload)
        if self.kind == "summarize_goal":
            if keys not in (_SUMMARIZE_LEAF_KEYS, _SUMMARIZE_PARENT_KEYS):
                raise InputError(f"summarize_goal payload has keys {sorted(keys)}")
        elif keys != _PAYLOAD_KEYS[self.kind]:
            raise InputError(f"{self.kind} payload has keys {sorted(keys)}, "
                             f"expected {sorted(_PAYLOAD_KEYS[self.kind])}")


MatchPair = tuple[tuple[int, int], tuple[int, int]]


@dataclass(frozen=True)
class AnnotatorResponse:
    raw: str
    cached: bool = False
    verdict: bool | None = None  # YES/NO kinds
    text: str | None = None  # summaries
    pairs: tuple[MatchPair, ...] | None = None  # step matching


@runtime_checkable
class Backend(Protocol):
    """Anything that can answer an AnnotatorRequest with a raw transcript."""

    name: str

    def complete(self, request: AnnotatorRequest) -> str: ...


@dataclass
class CallPolicy:
    """Retry/backoff policy for backend calls."""

    max_attempts: int = 3
    backoff_base: float = 0.5
    backoff_factor: float = 2.0
    sleep: Callable[[float], None] = time.sleep


def _digest_file(path: str) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(65536), b""):
                h.update(chunk)
    except OSError:
        # Unreadable frames still need a stable key; fall back to the path.
        h.update(b"missing:")
        h.update(path.encode())
    return h.hexdigest()


def _canonical(value: Any) -> Any:
    if isinstance(value, FrameHandle):
        return {"frame_digest": _digest_file(value.path)}
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


def cache_key(request: AnnotatorRequest) -> str:
    """Content hash of (kind, prompt_version, payload), frames by content."""
    doc = {"kind": request.kind, "prompt_version": request.prompt_version,
           "payload": _canonical(request.payload)}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


_VERDICT_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_RANGE_RE = re.compile(r"^\s*(\d+)\s*(?:-+\s*(\d+))?\s*$")


def parse_verdict(raw: str) -> bool:
    """First standalone yes/no token wins, tolerating chatty transcripts."""
    m = _VERDICT_RE.search(raw)
    if not m:
        raise AnnotatorParseError(f"no YES/NO verdict in transcript: {raw!r}")
    return m.group(1).lower() == "yes"


def parse_summary(raw: str) -> str:
    text = raw.strip().strip('"').strip()
    if not text:
        raise AnnotatorParseError("backend returned an empty summary")
    return text


def _parse_range(value: Any, where: str) -> tuple[int, int]:
    if isinstance(value, bool):
        raise AnnotatorParseError(f"{where}: not a step interval: {value!r}")
    if isinstance(value, int):
        return (value, value)
    if isinstance(value, str):
        m = _RANGE_RE.match(value)
        if m:
            start = int(m.group(1))
            end = int(m.group(2)) if m.group(2) is not None else start
            return (start, end)
    if isinstance(value, (list, tuple)) and len(value) == 2 \
            and all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        return (value[0], value[1])
    raise AnnotatorParseError(f"{where}: not a step interval: {value!r}")


def parse_pairs(raw: str) -> tuple[MatchPair, ...]:
    """Extract step-interval pairs from a transcript.

    Accepts a JSON document (optionally wrapped in prose) shaped as
    ``{"pairs": [...]}`` or a bare list, where each entry is
    ``{"a": ..., "b": ...}`` or a two-element list; intervals may be single
    indices, ``[start, end]`` lists, or ``"start-end"`` strings (0-based,
    inclusive).
    """
    doc = None
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError:
        for pattern in (r"\{.*\}", r"\[.*\]"):
            m = re.search(pattern, raw, re.DOTALL)
            if m:
                try:
                    doc = json.loads(m.group(0))
                    break
                except json.JSONDecodeError:
                    continue
    if doc is None:
        raise AnnotatorParseError(f"no JSON match list in transcript: {raw!r}")
    if isinstance(doc, dict):
        doc = doc.get("pairs")
    if not isinstance(doc, list):
        raise AnnotatorParseError("match transcript JSON has no pair list")
    pairs: list[MatchPair] = []
    for i, entry in enumerate(doc):
        where = f"pair {i}"
        if isinstance(entry, dict) and "a" in entry and "b" in entry:
            pairs.append((_parse_range(entry["a"], where), _parse_range(entry["b"], where)))
        elif isinstance(entry, (list, tuple)) and len(entry) == 2:
            pairs.append((_parse_range(entry[0], where), _parse_range(entry[1], where)))
        else:
            raise AnnotatorParseError(f"{where}: unrecognized match entry {entry!r}")
    return tuple(pairs)


def parse_response(kind: str, raw: str, cached: bool = False) -> AnnotatorResponse:
    if kind in ("same_software", "consistency", "modularity"):
        return AnnotatorResponse(raw=raw, cached=cached, verdict=parse_verdict(raw))
    if kind == "summarize_goal":
        return AnnotatorResponse(raw=raw, cached=cached, text=parse_summary(raw))
    if kind == "match_steps":
        return AnnotatorResponse(raw=raw, cached=cached, pairs=parse_pairs(raw))
    raise InputError(f"unknown annotator request kind {kind!r}")
