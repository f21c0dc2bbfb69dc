"""HTTP chat backend for multimodal language-model judgments.

Speaks the common chat-completions JSON shape: one POST per request with
text blocks and base64 PNG images. Endpoint and model come from config;
the credential only ever comes from an environment variable.
"""

from __future__ import annotations

import base64
import io
import os
from dataclasses import dataclass, field
from typing import Any

import requests

from ..errors import BackendError, InputError
from ..frames import load_frame
from .base import AnnotatorRequest, FrameHandle
from . import prompts

DEFAULT_KEY_ENV = "WORKMINE_API_KEY"


def _image_block(handle: FrameHandle, max_edge: int) -> dict:
    try:
        frame = load_frame(handle.path).fit_max_edge(max_edge)
    except InputError as exc:
        raise BackendError(f"cannot send frame to backend: {exc}") from None
    buf = io.BytesIO()
    frame.to_pil().save(buf, format="PNG")
    data = base64.b64encode(buf.getvalue()).decode("ascii")
    return {"type": "image_url",
            "image_url": {"url": f"data:image/png;base64,{data}"}}


def _text_block(text: str) -> dict:
    return {"type": "text", "text": text}


def _numbered(lines: list[str]) -> str:
    return "\n".join(f"{i}. {line}" for i, line in enumerate(lines))


@dataclass
class LlmBackend:
    endpoint: str  # full URL of a chat-completions style endpoint
    model: str
    api_key_env: str = DEFAULT_KEY_ENV
    max_edge: int = 1024  # frames are downscaled to bound payload size
    timeout: float = 120.0
    temperature: float = 0.0
    session: Any = field(default=None, repr=False)  # injectable for tests

    @property
    def name(self) -> str:
        return f"llm-{self.model}"

    def complete(self, request: AnnotatorRequest) -> str:
        api_key = os.environ.get(self.api_key_env)
        if not api_key:
            raise BackendError(
                f"missing credential: set {self.api_key_env} for the LM backend")
        body = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": self._content(request)}],
        }
        http = self.session or requests
        try:
            resp = http.post(self.endpoint, json=body, timeout=self.timeout,
                             headers={"Authorization": f"Bearer {api_key}"})
        except requests.RequestException as exc:
            raise BackendError(f"backend request failed: {exc}") from None
        if resp.status_code != 200:
            raise BackendError(f"backend returned HTTP {resp.status_code}: "
                               f"{resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise BackendError("backend response is not a chat completion") from None

    def _content(self, request: AnnotatorRequest) -> list[dict]:
        p = request.payload
        if request.kind == "same_software":
            blocks = [_text_block(prompts.SAME_SOFTWARE_PROMPT)]
            for side, label in (("a", "first"), ("b", "second")):
                frame = p[f"frame_{side}"]
                if isinstance(frame, FrameHandle):
                    blocks.append(_text_block(f"The {label} screen:"))
                    blocks.append(_image_block(frame, self.max_edge))
                blocks.append(_text_block(
                    f"Actions around the {label} screen:\n{_numbered(p[f'actions_{side}'])}"))
            return blocks
        if request.kind == "summarize_goal":
            if "child_goals" in p:
                return [_text_block(prompts.SUMMARIZE_PARENT_PROMPT),
                        _text_block(_numbered(p["child_goals"]))]
            blocks = [_text_block(prompts.SUMMARIZE_STEP_PROMPT),
                      _text_block(_numbered(p["actions"]))]
            if isinstance(p["state"], FrameHandle):
                blocks.append(_text_block("Screen after these actions:"))
                blocks.append(_image_block(p["state"], self.max_edge))
            return blocks
        if request.kind == "consistency":
            blocks = [_text_block(prompts.CONSISTENCY_PROMPT),
                      _text_block(f"Task goal: {p['goal']}"),
                      _text_block(f"Action sequence:\n{_numbered(p['actions'])}")]
            for state in p["states"]:
                if isinstance(state, FrameHandle):
                    blocks.append(_image_block(state, self.max_edge))
            return blocks
        if request.kind == "modularity":
            focal = p["focal_index"]
            goals = [f"{g} <- current step" if i == focal else g
                     for i, g in enumerate(p["goals"])]
            return [_text_block(prompts.MODULARITY_PROMPT),
                    _text_block(f"Workflow steps:\n{_numbered(goals)}")]
        # match_steps
        return [_text_block(prompts.MATCH_STEPS_PROMPT),
                _text_block(f"Workflow A steps:\n{_numbered(p['goals_a'])}"),
                _text_block(f"Workflow B steps:\n{_numbered(p['goals_b'])}")]
