"""Pluggable text-generation backends.

Three kinds: ``remote`` (a chat-completions-style HTTP endpoint), ``replay``
(canned completions keyed by sample id or prompt digest), and ``fixed`` (a
constant completion). Backends are stateless after construction and safe
for concurrent generate() calls. Credentials are only ever read from an
environment variable named in the config, never from flags or files.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import requests

from .errors import BackendUnavailable, ConfigError, CredentialMissing, TranscriptMiss

KIND_REMOTE = "remote"
KIND_REPLAY = "replay"
KIND_FIXED = "fixed"

#: Default completion for the fixed stub: a valid, non-proactive decision,
#: so a stub-backed run degrades to "never act" rather than parse failures.
DEFAULT_STUB_COMPLETION = '{"proactive_score": 1, "tools": "None", "response": "None"}'

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    endpoint: Optional[str] = None
    model: Optional[str] = None
    credential_env: Optional[str] = "AGENT_API_KEY"
    temperature: float = 0.0
    max_output_tokens: int = 1024
    max_attempts: int = 3
    backoff_seconds: tuple[float, ...] = (0.5, 1.0, 2.0)
    timeout_seconds: float = 30.0
    transcript_path: Optional[str] = None
    completion: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "backoff_seconds", tuple(self.backoff_seconds))
        if self.kind not in (KIND_REMOTE, KIND_REPLAY, KIND_FIXED):
            raise ConfigError(f"unknown backend kind: {self.kind!r}")
        if self.kind == KIND_REMOTE and (not self.endpoint or not self.model):
            raise ConfigError("remote backends require an endpoint and a model id")
        if self.kind == KIND_REPLAY and not self.transcript_path:
            raise ConfigError("replay backends require a transcript file path")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_output_tokens < 1 or self.max_attempts < 1:
            raise ConfigError("max_output_tokens and max_attempts must be positive")


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class Backend:
    """Interface: one whole completion per generate() call."""

    kind: str

    def generate(self, prompt: str, key: Optional[str] = None) -> str:
        raise NotImplementedError


class FixedStubBackend(Backend):
    kind = KIND_FIXED

    def __init__(self, completion: Optional[str] = None):
        self._completion = completion if completion is not None else DEFAULT_STUB_COMPLETION

    def generate(self, prompt: str, key: Optional[str] = None) -> str:
        return self._completion


class ReplayBackend(Backend):
    """Canned completions from a transcript file.

    The transcript is line-delimited JSON with ``{"id": ..., "completion":
    ...}`` records. Lookup tries the caller-supplied key first, then the
    sha256 digest of the prompt.
    """

    kind = KIND_REPLAY

    def __init__(self, transcript_path: str | Path):
        self._entries: dict[str, str] = {}
        with open(transcript_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self._entries[str(record["id"])] = str(record["completion"])

    def generate(self, prompt: str, key: Optional[str] = None) -> str:
        if key is not None and key in self._entries:
            return self._entries[key]
        digest = prompt_digest(prompt)
        if digest in self._entries:
            return self._entries[digest]
        raise TranscriptMiss(key if key is not None else digest)

    def __len__(self) -> int:
        return len(self._entries)


class RemoteBackend(Backend):
    """Chat-completions-style HTTP backend with retry on transient failures."""

    kind = KIND_REMOTE

    def __init__(self, config: BackendConfig):
        self._config = config
        self._api_key: Optional[str] = None
        if config.credential_env:
            self._api_key = os.environ.get(config.credential_env)
            if not self._api_key:
                raise CredentialMissing(config.credential_env)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        return headers

    def generate(self, prompt: str, key: Optional[str] = None) -> str:
        cfg = self._config
        payload = {
            "model": cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens,
        }
        last_error = "no attempt made"
        for attempt in range(cfg.max_attempts):
            try:
                response = requests.post(
                    cfg.endpoint,
                    json=payload,
                    headers=self._headers(),
                    timeout=cfg.timeout_seconds,
                )
            except requests.RequestException as exc:
                last_error = str(exc)
            else:
                if response.status_code in _RETRYABLE_STATUS:
                    last_error = f"HTTP {response.status_code}"
                elif response.status_code != 200:
                    raise BackendUnavailable(f"endpoint returned HTTP {response.status_code}")
                else:
                    try:
                        return str(response.json()["choices"][0]["message"]["content"])
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise BackendUnavailable(f"unexpected response shape: {exc}") from None
            if attempt + 1 < cfg.max_attempts:
                delays = cfg.backoff_seconds or (0.0,)
                time.sleep(delays[min(attempt, len(delays) - 1)])
        raise BackendUnavailable(f"backend unreachable after {cfg.max_attempts} attempts: {last_error}")


def make_backend(config: BackendConfig) -> Backend:
    if config.kind == KIND_FIXED:
        return FixedStubBackend(config.completion)
    if config.kind == KIND_REPLAY:
        return ReplayBackend(config.transcript_path)
    return RemoteBackend(config)


def write_transcript(entries: dict[str, str], path: str | Path) -> None:
    """Write a replay transcript file (sample id -> completion)."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, completion in entries.items():
            fh.write(json.dumps({"id": key, "completion": completion}, ensure_ascii=False) + "\n")
