"""Data model and on-disk format for computer-use activity sessions.

A session is one worker's recorded activity on one task: an ordered list of
timestamped input/tool events, each optionally pointing at a screenshot
frame. Session files are UTF-8 JSON Lines so multi-thousand-event
recordings stream line by line: the first line is a header record with
task and worker metadata, every following line is one event record.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .errors import InputError

# Closed action vocabulary shared by human and agent sessions. Anything
# outside this set is carried as a custom kind instead of being dropped.
KNOWN_KINDS = frozenset({
    "click", "right_click", "double_click", "keypress", "scroll", "zoom",
    "noop", "browse_interactive", "run", "run_ipython", "edit", "read",
    "create", "search", "search_image", "open_image", "generate_image",
    "think", "message", "task_tracking", "reset_environment",
})

# Kinds whose argument payload is free-form text rather than structured
# fields; goal templates and token mining treat these differently.
FREE_TEXT_KINDS = frozenset({"keypress", "think", "message"})

WORKER_KINDS = ("human", "agent")
AI_USAGE_LABELS = ("independent", "augmentation", "automation")

_NORMALIZE_RE = re.compile(r"[\s\-]+")


def normalize_kind_name(raw: str) -> str:
    return _NORMALIZE_RE.sub("_", raw.strip().lower())


@dataclass(frozen=True)
class EventKind:
    """An action name from the shared human/agent vocabulary.

    Unknown names survive ingestion as custom kinds; custom names are
    normalized to lowercase with underscores.
    """

    name: str
    custom: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise InputError("event kind name must be non-empty")
        if self.custom:
            if self.name != normalize_kind_name(self.name):
                raise InputError(f"custom kind {self.name!r} is not normalized")
        elif self.name not in KNOWN_KINDS:
            raise InputError(f"unknown event kind {self.name!r}; use EventKind.parse")

    @classmethod
    def parse(cls, raw: str) -> EventKind:
        name = normalize_kind_name(raw)
        if not name:
            raise InputError("event kind name must be non-empty")
        return cls(name=name, custom=name not in KNOWN_KINDS)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ScreenshotRef:
    """Reference to a PNG frame, relative to the session file's directory."""

    path: str
    frame_id: int = 0

    def resolve(self, root: Path | None) -> Path:
        p = Path(self.path)
        if p.is_absolute() or root is None:
            return p
        return root / p


@dataclass(frozen=True)
class RawEvent:
    index: int
    t: float  # seconds since session start
    kind: EventKind
    args: dict[str, str] = field(default_factory=dict)
    app: str | None = None  # foreground application, when recorded
    screenshot: ScreenshotRef | None = None


@dataclass(frozen=True)
class WorkerMeta:
    worker_id: str
    kind: str  # "human" | "agent"
    framework: str | None = None
    backbone: str | None = None
    ai_usage: str | None = None  # human-only, externally labeled
    cost_usd: float | None = None


@dataclass(frozen=True)
class IngestFlag:
    event_index: int
    code: str
    message: str


@dataclass(frozen=True)
class Trajectory:
    """One worker's full session on one task. Immutable once built."""

    task_id: str
    worker: WorkerMeta
    events: tuple[RawEvent, ...]
    elapsed_seconds: float
    provenance: str = ""
    # Ingestion diagnostics and file location are not session content, so
    # they stay out of equality (serialized copies compare equal).
    flags: tuple[IngestFlag, ...] = field(default=(), compare=False)
    root: Path | None = field(default=None, compare=False, repr=False)

    @property
    def span_seconds(self) -> float:
        if not self.events:
            return 0.0
        return self.events[-1].t - self.events[0].t


@dataclass(frozen=True)
class Violation:
    invariant: str
    event_index: int | None
    message: str


def render_event(event: RawEvent) -> str:
    """One-line text form of an event, e.g. ``click(x='312', y='48')``."""
    inner = ", ".join(f"{k}={event.args[k]!r}" for k in sorted(event.args))
    return f"{event.kind.name}({inner})"


def validate_trajectory(t: Trajectory) -> list[Violation]:
    """Check every model invariant; returns an empty list iff all hold.

    Total function: never raises on bad data, only reports. Screenshot
    resolution is checked only when the trajectory knows its root
    directory, and references already flagged at ingestion are not
    re-reported.
    """
    out: list[Violation] = []
    if not t.events:
        out.append(Violation("events-nonempty", None, "trajectory has no events"))

    flagged = {f.event_index for f in t.flags if f.code == "screenshot-unresolved"}
    prev_index: int | None = None
    prev_t: float | None = None
    for e in t.events:
        if prev_index is not None and e.index <= prev_index:
            out.append(Violation(
                "index-ordered", e.index,
                f"index {e.index} does not increase after {prev_index}"))
        if not math.isfinite(e.t) or e.t < 0:
            out.append(Violation("timestamp-nonnegative", e.index, f"timestamp {e.t!r}"))
        if prev_t is not None and e.t < prev_t:
            out.append(Violation(
                "timestamps-monotonic", e.index,
                f"timestamp {e.t} goes back before {prev_t}"))
        if e.kind.name in ("click", "double_click"):
            if not (("x" in e.args and "y" in e.args) or "element" in e.args):
                out.append(Violation(
                    "click-coordinates", e.index,
                    "click carries neither x/y coordinates nor an element descriptor"))
        if e.kind.name == "keypress" and not e.args.get("text"):
            out.append(Violation("keypress-nonempty", e.index, "keypress without text"))
        if e.screenshot is not None and t.root is not None and e.index not in flagged:
            if not e.screenshot.resolve(t.root).is_file():
                out.append(Violation(
                    "screenshot-resolves", e.index,
                    f"frame file {e.screenshot.path!r} is missing"))
        prev_index, prev_t = e.index, e.t

    if not math.isfinite(t.elapsed_seconds) or t.elapsed_seconds < 0:
        out.append(Violation("elapsed-nonnegative", None, f"elapsed {t.elapsed_seconds!r}"))
    elif t.events and t.elapsed_seconds < t.span_seconds - 1e-9:
        out.append(Violation(
            "elapsed-covers-span", None,
            f"elapsed {t.elapsed_seconds} shorter than event span {t.span_seconds}"))

    w = t.worker
    if w.kind not in WORKER_KINDS:
        out.append(Violation("worker-kind", None, f"worker kind {w.kind!r}"))
    if w.ai_usage is not None:
        if w.kind != "human":
            out.append(Violation("ai-usage-human-only", None,
                                 f"ai_usage set on {w.kind!r} worker"))
        elif w.ai_usage not in AI_USAGE_LABELS:
            out.append(Violation("ai-usage-label", None, f"ai_usage {w.ai_usage!r}"))
    if w.cost_usd is not None and (not math.isfinite(w.cost_usd) or w.cost_usd < 0):
        out.append(Violation("cost-non-negative", None, f"cost_usd {w.cost_usd!r}"))
    return out


# --- JSON Lines serialization ------------------------------------------------

def _arg_text(value: Any, where: str) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    raise InputError(f"{where}: argument value {value!r} is not text or a number")


def _screenshot_from_doc(doc: Any, where: str) -> ScreenshotRef:
    if isinstance(doc, str):
        return ScreenshotRef(path=doc)
    if isinstance(doc, dict) and isinstance(doc.get("path"), str):
        frame_id = doc.get("frame_id", 0)
        if not isinstance(frame_id, int):
            raise InputError(f"{where}: screenshot frame_id must be an integer")
        return ScreenshotRef(path=doc["path"], frame_id=frame_id)
    raise InputError(f"{where}: screenshot must be a path or a {{path, frame_id}} object")


def _event_from_doc(doc: Any, where: str, strict: bool) -> RawEvent:
    if not isinstance(doc, dict):
        raise InputError(f"{where}: event record must be an object")
    try:
        index = doc["index"]
        t = doc["t"]
        kind_raw = doc["kind"]
    except KeyError as exc:
        raise InputError(f"{where}: event record missing field {exc.args[0]!r}") from None
    if not isinstance(index, int):
        raise InputError(f"{where}: index must be an integer")
    if isinstance(t, bool) or not isinstance(t, (int, float)):
        raise InputError(f"{where}: t must be a number")
    if not isinstance(kind_raw, str):
        raise InputError(f"{where}: kind must be a string")
    if strict and normalize_kind_name(kind_raw) not in KNOWN_KINDS:
        raise InputError(f"{where}: unknown event kind {kind_raw!r} (strict mode)")
    kind = EventKind.parse(kind_raw)

    args_doc = doc.get("args", {})
    if not isinstance(args_doc, dict):
        raise InputError(f"{where}: args must be an object")
    args = {str(k): _arg_text(v, where) for k, v in args_doc.items()}

    app = doc.get("app")
    if app is not None and not isinstance(app, str):
        raise InputError(f"{where}: app must be a string")
    screenshot = None
    if doc.get("screenshot") is not None:
        screenshot = _screenshot_from_doc(doc["screenshot"], where)
    return RawEvent(index=index, t=float(t), kind=kind, args=args,
                    app=app, screenshot=screenshot)


def _event_doc(e: RawEvent) -> dict:
    doc: dict[str, Any] = {"index": e.index, "t": e.t, "kind": e.kind.name,
                           "args": dict(sorted(e.args.items()))}
    if e.app is not None:
        doc["app"] = e.app
    if e.screenshot is not None:
        doc["screenshot"] = {"path": e.screenshot.path, "frame_id": e.screenshot.frame_id}
    return doc


def worker_from_doc(doc: Any, where: str = "worker") -> WorkerMeta:
    if not isinstance(doc, dict) or not isinstance(doc.get("worker_id"), str):
        raise InputError(f"{where}: worker metadata must be an object with a worker_id")
    kind = doc.get("kind")
    if not isinstance(kind, str):
        raise InputError(f"{where}: worker kind must be a string")
    cost = doc.get("cost_usd")
    if cost is not None and (isinstance(cost, bool) or not isinstance(cost, (int, float))):
        raise InputError(f"{where}: cost_usd must be a number")
    return WorkerMeta(
        worker_id=doc["worker_id"],
        kind=kind,
        framework=doc.get("framework"),
        backbone=doc.get("backbone"),
        ai_usage=doc.get("ai_usage"),
        cost_usd=None if cost is None else float(cost),
    )


def worker_doc(w: WorkerMeta) -> dict:
    doc: dict[str, Any] = {"worker_id": w.worker_id, "kind": w.kind}
    for key in ("framework", "backbone", "ai_usage", "cost_usd"):
        value = getattr(w, key)
        if value is not None:
            doc[key] = value
    return doc


def _load_json_line(line: str, lineno: int, source: str) -> Any:
    try:
        return json.loads(line)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}: line {lineno}: malformed record: {exc.msg}") from None


def parse_session(text: str, root: Path | None = None, strict: bool = False,
                  source: str = "<session>") -> Trajectory:
    """Parse the JSON Lines session format into a validated Trajectory.

    Non-strict mode keeps events with unresolvable screenshots and flags
    them; strict mode aborts on any violation, including unknown kinds.
    """
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise InputError(f"{source}: missing header line")
    header = _load_json_line(lines[0], 1, source)
    if not isinstance(header, dict):
        raise InputError(f"{source}: line 1: header must be an object")
    task_id = header.get("task_id")
    if not isinstance(task_id, str):
        raise InputError(f"{source}: line 1: header missing task_id")
    elapsed = header.get("elapsed_seconds")
    if isinstance(elapsed, bool) or not isinstance(elapsed, (int, float)):
        raise InputError(f"{source}: line 1: header missing numeric elapsed_seconds")
    worker = worker_from_doc(header.get("worker"), f"{source}: line 1")
    provenance = header.get("provenance", "")
    if not isinstance(provenance, str):
        raise InputError(f"{source}: line 1: provenance must be a string")

    events: list[RawEvent] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        doc = _load_json_line(line, lineno, source)
        events.append(_event_from_doc(doc, f"{source}: line {lineno}", strict))

    offending = [e.index for prev, e in zip(events, events[1:]) if e.t < prev.t]
    if offending:
        raise InputError(f"{source}: non-monotonic timestamps at indices {offending}")

    flags: list[IngestFlag] = []
    if root is not None:
        for e in events:
            if e.screenshot is not None and not e.screenshot.resolve(root).is_file():
                if strict:
                    raise InputError(
                        f"{source}: event {e.index}: screenshot "
                        f"{e.screenshot.path!r} does not resolve to a readable frame")
                flags.append(IngestFlag(e.index, "screenshot-unresolved",
                                        f"missing frame file {e.screenshot.path!r}"))

    t = Trajectory(task_id=task_id, worker=worker, events=tuple(events),
                   elapsed_seconds=float(elapsed), provenance=provenance,
                   flags=tuple(flags), root=root)
    if strict:
        report = validate_trajectory(t)
        if report:
            details = "; ".join(f"{v.invariant}@{v.event_index}" for v in report)
            raise InputError(f"{source}: invariant violations: {details}")
    return t


def ingest_trajectory(path: str | Path, strict: bool = False) -> Trajectory:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read session file {path}: {exc}") from None
    return parse_session(text, root=path.parent, strict=strict, source=str(path))


def session_to_jsonl(t: Trajectory) -> str:
    header: dict[str, Any] = {
        "task_id": t.task_id,
        "worker": worker_doc(t.worker),
        "elapsed_seconds": t.elapsed_seconds,
    }
    if t.provenance:
        header["provenance"] = t.provenance
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(_event_doc(e), sort_keys=True) for e in t.events)
    return "\n".join(lines) + "\n"


def write_session(t: Trajectory, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(session_to_jsonl(t), encoding="utf-8")
    return path


def with_events(t: Trajectory, events: tuple[RawEvent, ...],
                provenance_note: str | None = None) -> Trajectory:
    """Copy of ``t`` with replaced events; optionally appends a provenance
    note once (repeat applications stay idempotent)."""
    provenance = t.provenance
    if provenance_note and provenance_note not in provenance:
        provenance = f"{provenance}; {provenance_note}" if provenance else provenance_note
    return replace(t, events=events, provenance=provenance)
