"""Chat-completion provider abstraction.

Ships two deterministic offline providers (scripted, replay) and a generic
HTTP client for any endpoint speaking the common chat-completions shape.
Remote calls are retried with exponential backoff on timeouts and 5xx; 4xx
responses are terminal.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import (
    ProviderHTTPError,
    ProviderTimeout,
    ReplayExhaustedError,
    ScriptMissError,
)

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown message role: {self.role!r}")
        if not self.content or not self.content.strip():
            raise ValueError("message content must be non-empty")

    def as_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


def validate_messages(messages: Sequence[ChatMessage]) -> None:
    """A sequence may start with at most one system message, none later."""
    for i, message in enumerate(messages):
        if message.role == "system" and i > 0:
            raise ValueError(f"system message at position {i}; only position 0 allowed")


@dataclass(frozen=True)
class GenParams:
    """Sampling parameters recorded in run metadata."""

    temperature: float = 0.7
    max_tokens: int | None = None
    seed: int | None = None


class Provider(ABC):
    """Behavior contract: complete(messages, params) -> text."""

    name: str = "provider"

    @abstractmethod
    def complete(
        self, messages: Sequence[ChatMessage], params: GenParams | None = None
    ) -> str: ...


def last_user_content(messages: Sequence[ChatMessage]) -> str:
    for message in reversed(messages):
        if message.role == "user":
            return message.content
    raise ValueError("message sequence has no user message")


class ScriptedProvider(Provider):
    """Pure function of (script, key) where key derives from the final user message.

    The default key is the final user content itself (exact-match map); pass
    ``key_fn`` to derive something coarser, e.g. the first line only.
    """

    def __init__(
        self,
        script: Mapping[str, str],
        fallback: str | None = None,
        key_fn: Callable[[Sequence[ChatMessage]], str] | None = None,
        name: str = "scripted",
    ):
        self.script = dict(script)
        self.fallback = fallback
        self.key_fn = key_fn or last_user_content
        self.name = name
        self.calls = 0

    def complete(
        self, messages: Sequence[ChatMessage], params: GenParams | None = None
    ) -> str:
        validate_messages(messages)
        self.calls += 1
        key = self.key_fn(messages)
        try:
            return self.script[key]
        except KeyError:
            if self.fallback is not None:
                return self.fallback
            raise ScriptMissError(f"no script entry for key {key[:120]!r}") from None

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "ScriptedProvider":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(data.get("script", data), fallback=data.get("fallback"), **kwargs)


class ReplayProvider(Provider):
    """Emits one transcript's recorded assistant messages in order.

    Stateful and single-consumer: each call returns the next answer and
    advances the cursor; exhausting the transcript raises.
    """

    def __init__(self, answers: Sequence[str], name: str = "replay"):
        self.answers = list(answers)
        self.name = name
        self._index = 0

    def complete(
        self, messages: Sequence[ChatMessage], params: GenParams | None = None
    ) -> str:
        validate_messages(messages)
        if self._index >= len(self.answers):
            raise ReplayExhaustedError(
                f"replay exhausted after {len(self.answers)} answers"
            )
        answer = self.answers[self._index]
        self._index += 1
        return answer

    def reset(self) -> None:
        self._index = 0


class HttpProvider(Provider):
    """Client for a chat-completions style HTTP endpoint.

    Request: POST ``{base_url}`` with ``{"model", "messages", "temperature",
    "max_tokens", "seed"}``. The response may carry the generated text either
    as ``{"text": ...}`` or in the ``choices[0].message.content`` shape.
    The API key is read from the named environment variable, never from
    config file contents.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        auth_env: str | None = None,
        auth_header: str = "Authorization",
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 1.0,
        max_in_flight: int = 4,
        debug_log_dir: str | Path | None = None,
        name: str | None = None,
    ):
        self.base_url = base_url
        self.model = model
        self.auth_env = auth_env
        self.auth_header = auth_header
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.name = name or f"http:{model}"
        self.debug_log_dir = Path(debug_log_dir) if debug_log_dir else None
        self._gate = threading.Semaphore(max_in_flight)

    def _headers(self) -> dict[str, str]:
        import os

        headers = {"Content-Type": "application/json"}
        if self.auth_env:
            key = os.environ.get(self.auth_env, "")
            if key:
                headers[self.auth_header] = f"Bearer {key}"
        return headers

    @staticmethod
    def _extract_text(payload: dict) -> str:
        if "text" in payload:
            return payload["text"]
        return payload["choices"][0]["message"]["content"]

    def _debug_dump(self, request_hash: str, body: dict, response: dict | str) -> None:
        if self.debug_log_dir is None:
            return
        self.debug_log_dir.mkdir(parents=True, exist_ok=True)
        out = self.debug_log_dir / f"{request_hash}.json"
        out.write_text(
            json.dumps({"request": body, "response": response}, ensure_ascii=False),
            encoding="utf-8",
        )

    def complete(
        self, messages: Sequence[ChatMessage], params: GenParams | None = None
    ) -> str:
        import requests

        validate_messages(messages)
        params = params or GenParams()
        body = {
            "model": self.model,
            "messages": [m.as_dict() for m in messages],
            "temperature": params.temperature,
        }
        if params.max_tokens is not None:
            body["max_tokens"] = params.max_tokens
        if params.seed is not None:
            body["seed"] = params.seed
        encoded = json.dumps(body, sort_keys=True, ensure_ascii=False)
        request_hash = hashlib.sha256(encoded.encode("utf-8")).hexdigest()[:16]

        last_error: Exception | None = None
        with self._gate:
            for attempt in range(self.max_retries):
                started = time.monotonic()
                try:
                    resp = requests.post(
                        self.base_url,
                        data=encoded.encode("utf-8"),
                        headers=self._headers(),
                        timeout=self.timeout,
                    )
                except requests.Timeout as exc:
                    last_error = ProviderTimeout(
                        f"timeout after {self.timeout}s (attempt {attempt + 1})"
                    )
                    logger.warning("%s: %s", self.name, last_error)
                except requests.RequestException as exc:
                    last_error = ProviderHTTPError(f"transport failure: {exc}")
                    logger.warning("%s: %s", self.name, last_error)
                else:
                    latency = time.monotonic() - started
                    if resp.status_code >= 500:
                        last_error = ProviderHTTPError(
                            f"server error {resp.status_code}", status=resp.status_code
                        )
                        logger.warning("%s: %s", self.name, last_error)
                    elif resp.status_code >= 400:
                        raise ProviderHTTPError(
                            f"client error {resp.status_code}: {resp.text[:200]}",
                            status=resp.status_code,
                        )
                    else:
                        payload = resp.json()
                        usage = payload.get("usage", {})
                        logger.info(
                            "%s: request=%s latency=%.3fs tokens=%s",
                            self.name,
                            request_hash,
                            latency,
                            usage or "n/a",
                        )
                        self._debug_dump(request_hash, body, payload)
                        return self._extract_text(payload)
                if attempt + 1 < self.max_retries:
                    time.sleep(self.backoff * (2**attempt))
        assert last_error is not None
        self._debug_dump(request_hash, body, str(last_error))
        raise last_error
