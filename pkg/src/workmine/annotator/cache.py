"""Content-addressed response cache.

One JSON file per request key, sharded by the key's first two hex chars.
Writes go through a temp file plus rename and a process-local lock, so
concurrent judgment calls never observe a torn record.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path


class ResponseCache:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._write_lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key}.json"

    def get(self, key: str) -> str | None:
        path = self._path(key)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        raw = doc.get("raw")
        return raw if isinstance(raw, str) else None

    def put(self, key: str, raw: str, kind: str, prompt_version: str) -> None:
        path = self._path(key)
        doc = {"key": key, "kind": kind, "prompt_version": prompt_version, "raw": raw}
        blob = json.dumps(doc, sort_keys=True, indent=2) + "\n"
        with self._write_lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(blob, encoding="utf-8")
            os.replace(tmp, path)
