"""Pluggable judgment boundary: LM backend, deterministic stub, response cache."""

from .base import (AnnotatorRequest, AnnotatorResponse, Backend, CallPolicy,
                   FrameHandle, MatchPair, cache_key, parse_pairs,
                   parse_response, parse_summary, parse_verdict)
from .cache import ResponseCache
from .llm import LlmBackend
from .prompts import PROMPT_VERSION
from .service import Annotator, call, create_annotator
from .stub import StubBackend

__all__ = [
    "Annotator", "AnnotatorRequest", "AnnotatorResponse", "Backend",
    "CallPolicy", "FrameHandle", "LlmBackend", "MatchPair", "PROMPT_VERSION",
    "ResponseCache", "StubBackend", "cache_key", "call", "create_annotator",
    "parse_pairs", "parse_response", "parse_summary", "parse_verdict",
]
