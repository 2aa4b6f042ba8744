"""Text-completion backends.

Two kinds exist: a scripted table (deterministic fixtures for tests and the
bundled corpus) and a remote chat-completion endpoint spoken over HTTP.
Both are safe to call from several worker threads at once.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import httpx

from .errors import BackendUnavailable, ConfigError, ScriptMiss
from .model import read_jsonl

log = logging.getLogger(__name__)

Message = Mapping[str, str]


@dataclass(frozen=True)
class Completion:
    text: str
    tokens: int


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "scripted"
    endpoint: str | None = None
    model_name: str | None = None
    max_tokens: int = 1000
    temperature: float = 0.0
    seed: int = 42
    script: str | None = None
    api_key_env: str | None = None
    max_in_flight: int = 4
    max_retries: int = 3
    timeout: float = 60.0

    def __post_init__(self):
        if self.kind not in ("scripted", "remote"):
            raise ConfigError(f"unknown backend kind {self.kind!r}", "kind")
        if self.kind == "remote" and not (self.endpoint and self.model_name):
            raise ConfigError("remote backends need both endpoint and model_name", "endpoint")
        if self.kind == "scripted" and not self.script:
            raise ConfigError("scripted backends need a script path", "script")
        if self.max_tokens <= 0:
            raise ConfigError("must be positive", "max_tokens")
        if self.temperature < 0:
            raise ConfigError("must be non-negative", "temperature")


def prompt_text(system: str, messages: Sequence[Message]) -> str:
    return "\n".join([system, *(m["content"] for m in messages)])


@dataclass(frozen=True)
class ScriptEntry:
    match: Mapping[str, Any]
    reply: str
    tokens: int | None = None

    def matches(self, meta: Mapping[str, Any], prompt: str) -> bool:
        for key, want in self.match.items():
            if key == "prompt_contains":
                needles = [want] if isinstance(want, str) else want
                if not all(n in prompt for n in needles):
                    return False
            elif key not in meta or str(meta[key]) != str(want):
                return False
        return True


class ScriptedBackend:
    """Lookup-table backend.

    Each entry has a ``match`` dict; keys other than ``prompt_contains`` are
    compared against the request metadata (``task``, ``query_id``,
    ``fingerprint``, ...). Among matching entries the one constraining the
    most keys wins, earlier entries breaking ties.
    """

    kind = "scripted"

    def __init__(self, entries: Sequence[ScriptEntry | Mapping[str, Any]], name: str = "scripted"):
        self.name = name
        self.entries = tuple(e if isinstance(e, ScriptEntry) else ScriptEntry(dict(e["match"]), e["reply"], e.get("tokens")) for e in entries)

    @classmethod
    def from_jsonl(cls, path, name: str | None = None) -> "ScriptedBackend":
        return cls(list(read_jsonl(path)), name=name or str(path))

    def lookup(self, meta: Mapping[str, Any], prompt: str) -> ScriptEntry:
        best, best_size = None, -1
        for entry in self.entries:
            if len(entry.match) > best_size and entry.matches(meta, prompt):
                best, best_size = entry, len(entry.match)
        if best is None:
            raise ScriptMiss(dict(meta))
        return best

    def complete(self, system: str, messages: Sequence[Message], meta: Mapping[str, Any] | None = None) -> Completion:
        if not messages:
            raise ValueError("messages must be non-empty")
        entry = self.lookup(meta or {}, prompt_text(system, messages))
        tokens = entry.tokens if entry.tokens is not None else len(entry.reply.split())
        return Completion(entry.reply, tokens)


class RemoteBackend:
    """Chat-completion client with bounded concurrency and retry on transient errors."""

    kind = "remote"
    RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}

    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None, backoff: float = 0.5):
        self.config = config
        self.backoff = backoff
        headers = {"Content-Type": "application/json"}
        if config.api_key_env:
            key = os.environ.get(config.api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(timeout=config.timeout, headers=headers, transport=transport)
        self._slots = threading.BoundedSemaphore(max(1, config.max_in_flight))

    def request_body(self, system: str, messages: Sequence[Message]) -> dict:
        return {
            "model": self.config.model_name,
            "messages": ([{"role": "system", "content": system}] if system else [])
            + [{"role": m["role"], "content": m["content"]} for m in messages],
            "max_tokens": self.config.max_tokens,
            "temperature": self.config.temperature,
            "seed": self.config.seed,
        }

    def complete(self, system: str, messages: Sequence[Message], meta: Mapping[str, Any] | None = None) -> Completion:
        if not messages:
            raise ValueError("messages must be non-empty")
        body = self.request_body(system, messages)
        last: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._client.post(self.config.endpoint, json=body)
            except httpx.TransportError as exc:
                last = exc
                log.warning("backend %s attempt %d failed: %r", self.config.endpoint, attempt + 1, exc)
                continue
            if resp.status_code in self.RETRY_STATUS:
                last = BackendUnavailable(f"HTTP {resp.status_code}")
                log.warning("backend %s attempt %d got HTTP %d", self.config.endpoint, attempt + 1, resp.status_code)
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                data = resp.json()
                text = data["choices"][0]["message"]["content"] or ""
                tokens = int((data.get("usage") or {}).get("completion_tokens", 0))
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendUnavailable(f"malformed completion response: {exc!r}") from exc
            return Completion(text, tokens)
        raise BackendUnavailable(f"{self.config.endpoint} unavailable after {self.config.max_retries + 1} attempts: {last!r}")

    def close(self):
        self._client.close()


Backend = ScriptedBackend | RemoteBackend


def make_backend(config: BackendConfig, base_dir=None) -> Backend:
    if config.kind == "scripted":
        path = config.script
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return ScriptedBackend.from_jsonl(path)
    return RemoteBackend(config)


def complete(backend, system: str, messages: Sequence[Message], meta: Mapping[str, Any] | None = None) -> Completion:
    return backend.complete(system, messages, meta)
