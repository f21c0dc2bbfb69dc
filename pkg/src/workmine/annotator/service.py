"""Caching, retrying call path plus a typed facade over the request kinds."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..errors import BackendError
from .base import (AnnotatorRequest, AnnotatorResponse, Backend, CallPolicy,
                   FrameHandle, MatchPair, cache_key, parse_response)
from .cache import ResponseCache
from .llm import LlmBackend
from .prompts import PROMPT_VERSION
from .stub import StubBackend


def call(request: AnnotatorRequest, backend: Backend,
         policy: CallPolicy | None = None,
         cache: ResponseCache | None = None) -> AnnotatorResponse:
    """Resolve one request: cache hit, else backend with bounded retries.

    Only transcripts that parse are persisted, so a garbled answer never
    poisons future runs.
    """
    policy = policy or CallPolicy()
    key = cache_key(request)
    if cache is not None:
        raw = cache.get(key)
        if raw is not None:
            return parse_response(request.kind, raw, cached=True)

    last_error: BackendError | None = None
    for attempt in range(policy.max_attempts):
        if attempt:
            policy.sleep(policy.backoff_base * policy.backoff_factor ** (attempt - 1))
        try:
            raw = backend.complete(request)
            break
        except BackendError as exc:
            last_error = exc
    else:
        raise BackendError(
            f"{request.kind} request failed after {policy.max_attempts} "
            f"attempts: {last_error}") from last_error

    response = parse_response(request.kind, raw)
    if cache is not None:
        cache.put(key, raw, request.kind, request.prompt_version)
    return response


@dataclass
class Annotator:
    """One configured judgment channel: backend + cache + retry policy."""

    backend: Backend
    cache: ResponseCache | None = None
    policy: CallPolicy = field(default_factory=CallPolicy)
    prompt_version: str = PROMPT_VERSION

    @property
    def id(self) -> str:
        return f"{self.backend.name}/{self.prompt_version}"

    def _call(self, kind: str, payload: dict) -> AnnotatorResponse:
        request = AnnotatorRequest(kind=kind, payload=payload,
                                   prompt_version=self.prompt_version)
        return call(request, self.backend, self.policy, self.cache)

    def judge_same_software(self, frame_a: FrameHandle | None,
                            frame_b: FrameHandle | None,
                            actions_a: list[str], actions_b: list[str],
                            app_a: str | None, app_b: str | None) -> bool:
        resp = self._call("same_software", {
            "frame_a": frame_a, "frame_b": frame_b,
            "actions_a": list(actions_a), "actions_b": list(actions_b),
            "app_a": app_a, "app_b": app_b,
        })
        return bool(resp.verdict)

    def summarize_step_goal(self, actions: list[str], kinds: list[str],
                            arg_values: list[str], app: str | None,
                            state: FrameHandle | None) -> str:
        resp = self._call("summarize_goal", {
            "actions": list(actions), "kinds": list(kinds),
            "arg_values": list(arg_values), "app": app, "state": state,
        })
        return resp.text or ""

    def summarize_parent_goal(self, child_goals: list[str]) -> str:
        resp = self._call("summarize_goal", {"child_goals": list(child_goals)})
        return resp.text or ""

    def judge_consistency(self, goal: str, actions: list[str],
                          states: list[FrameHandle]) -> bool:
        resp = self._call("consistency", {
            "goal": goal, "actions": list(actions), "states": list(states),
        })
        return bool(resp.verdict)

    def judge_modularity(self, goals: list[str], focal_index: int) -> bool:
        resp = self._call("modularity", {"goals": list(goals),
                                         "focal_index": focal_index})
        return bool(resp.verdict)

    def propose_step_matches(self, goals_a: list[str],
                             goals_b: list[str]) -> tuple[MatchPair, ...]:
        resp = self._call("match_steps", {"goals_a": list(goals_a),
                                          "goals_b": list(goals_b)})
        return resp.pairs or ()


def create_annotator(backend_name: str = "stub",
                     cache_dir: str | Path | None = None,
                     llm_endpoint: str | None = None,
                     llm_model: str | None = None,
                     llm_max_edge: int = 1024,
                     policy: CallPolicy | None = None) -> Annotator:
    """Build an annotator from config values.

    Cache directories are namespaced per backend so an LM cache is never
    consulted for stub runs or vice versa.
    """
    if backend_name == "stub":
        backend: Backend = StubBackend()
    elif backend_name == "llm":
        if not llm_endpoint or not llm_model:
            raise BackendError("llm backend needs an endpoint and a model name")
        backend = LlmBackend(endpoint=llm_endpoint, model=llm_model,
                             max_edge=llm_max_edge)
    else:
        raise BackendError(f"unknown annotator backend {backend_name!r}")
    cache = None
    if cache_dir is not None:
        cache = ResponseCache(Path(cache_dir) / backend.name)
    return Annotator(backend=backend, cache=cache,
                     policy=policy or CallPolicy())
