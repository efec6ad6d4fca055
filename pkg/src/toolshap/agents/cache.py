"""Persistent response cache keyed by (agent, prompt, coalition)."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import threading
from pathlib import Path

from toolshap.core import AgentResponse, Coalition, coalition_key
from toolshap.errors import CacheIOError

log = logging.getLogger(__name__)


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def load_jsonl(path: Path) -> list[dict]:
    """Read a JSON-lines file, dropping lines that do not parse."""
    records = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            log.warning("%s:%d: dropping corrupt cache line", path, lineno)
    return records


class JsonlStore:
    """Append-only JSON-lines persistence shared by the response and embedding caches.

    Write failures are logged once and the store degrades to memory-only.
    """

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path is not None else None
        self.io_error: CacheIOError | None = None
        self._lock = threading.Lock()

    def read(self) -> list[dict]:
        if self.path is None or not self.path.exists():
            return []
        try:
            return load_jsonl(self.path)
        except OSError as exc:
            self._fail(exc)
            return []

    def append(self, record: dict) -> None:
        if self.path is None or self.io_error is not None:
            return
        line = json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n"
        with self._lock:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                # a crash mid-write leaves a partial last line; start a fresh one
                needs_newline = self.path.exists() and self._ends_without_newline()
                with open(self.path, "a", encoding="utf-8") as fh:
                    if needs_newline:
                        fh.write("\n")
                    fh.write(line)
            except OSError as exc:
                self._fail(exc)

    def _ends_without_newline(self) -> bool:
        with open(self.path, "rb") as fh:
            fh.seek(0, os.SEEK_END)
            if fh.tell() == 0:
                return False
            fh.seek(-1, os.SEEK_END)
            return fh.read(1) != b"\n"

    def _fail(self, exc: OSError) -> None:
        self.io_error = CacheIOError(f"cache file {self.path}: {exc}")
        log.warning("%s; continuing with in-memory cache only", self.io_error)


class ResponseCache:
    def __init__(self, backing_path: str | Path | None = None):
        self._store = JsonlStore(backing_path)
        self._lock = threading.Lock()
        self.entries: dict[str, AgentResponse] = {}
        for rec in self._store.read():
            try:
                self.entries[rec["key"]] = AgentResponse.from_dict(rec["response"])
            except (KeyError, TypeError):
                log.warning("dropping malformed cache record in %s", backing_path)
        self.hits = 0
        self.misses = 0

    @property
    def backing_path(self) -> Path | None:
        return self._store.path

    @property
    def io_error(self) -> CacheIOError | None:
        return self._store.io_error

    @staticmethod
    def key(agent_id: str, prompt: str, ckey: str) -> str:
        return json.dumps([agent_id, prompt_hash(prompt), ckey])

    def get(self, key: str) -> AgentResponse | None:
        with self._lock:
            return self.entries.get(key)

    def put(self, key: str, response: AgentResponse) -> None:
        with self._lock:
            if key in self.entries:
                return
            self.entries[key] = response
        self._store.append({"key": key, "response": response.to_dict()})

    def __len__(self) -> int:
        return len(self.entries)


def cached_respond(cache: ResponseCache | None, agent, prompt: str, coalition: Coalition) -> AgentResponse:
    if cache is None:
        return agent.respond(prompt, coalition)
    key = cache.key(agent.agent_id, prompt, coalition_key(coalition, agent.catalog))
    hit = cache.get(key)
    if hit is not None:
        cache.hits += 1
        return dataclasses.replace(hit, source="cache")
    cache.misses += 1
    response = agent.respond(prompt, coalition)
    cache.put(key, response)
    return response
