"""Chat-completion backends: an HTTP client and a deterministic scripted mock.

Both speak the same contract: ``complete(CompletionRequest) -> CompletionResult``.
The HTTP backend POSTs the de-facto chat-completion JSON body
(``model``/``messages``/``temperature``/``max_tokens``) and reads
``choices[0].message.content``; the mock replays registered rules so agent
sessions and the dataset pipeline can run fully offline.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import requests

from .core import ChatMessage

DEFAULT_COMPLETION_PATH = "/v1/chat/completions"
BACKEND_URL_ENV = "NETCFG_BACKEND_URL"
MOCK_URL_SCHEME = "mock://"


class BackendError(Exception):
    """Base class for completion failures; carries the per-call request id."""

    def __init__(self, message: str, request_id: str) -> None:
        super().__init__(f"{message} (request {request_id})")
        self.request_id = request_id


class TransportError(BackendError):
    """Endpoint unreachable after the configured retries."""


class ProtocolError(BackendError):
    """Response body lacks the required chat-completion fields."""


class CompletionTimeoutError(BackendError):
    """The configured deadline elapsed before a response arrived."""


class DuplicateRuleError(ValueError):
    """An identical mock matcher was registered twice."""


@dataclass(frozen=True)
class CompletionRequest:
    """One chat-completion call: ordered messages plus sampling settings."""

    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 1024
    model_name: str = "local-model"

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("request must contain at least one message")
        if self.messages[0].role != "system":
            raise ValueError("first message must have role=system")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class CompletionResult:
    """Completion text plus the wall-clock latency of the model call."""

    text: str
    latency: float
    input_tokens: int | None = None
    output_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.latency < 0:
            raise ValueError("latency must be >= 0")


class ChatBackend(Protocol):
    def complete(self, request: CompletionRequest) -> CompletionResult: ...


class HttpChatBackend:
    """Client for a chat-completion HTTP endpoint.

    Transient transport failures (connection errors, timeouts) are retried
    up to ``retries`` times with exponential backoff; malformed responses
    raise ``ProtocolError`` without retry.  Latency is measured around the
    network call only, so timing metrics attribute cost to the model rather
    than to prompt construction.
    """

    def __init__(
        self,
        base_url: str,
        *,
        path: str = DEFAULT_COMPLETION_PATH,
        timeout: float = 60.0,
        retries: int = 2,
        backoff: float = 0.25,
    ) -> None:
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        if retries < 0:
            raise ValueError("retries must be >= 0")
        self.url = base_url.rstrip("/") + path
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def complete(self, request: CompletionRequest) -> CompletionResult:
        request_id = uuid.uuid4().hex[:12]
        body = {
            "model": request.model_name,
            "messages": [m.as_dict() for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        last_error: BackendError | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            started = time.perf_counter()
            try:
                response = requests.post(self.url, json=body, timeout=self.timeout)
            except requests.exceptions.Timeout:
                last_error = CompletionTimeoutError(
                    f"no response from {self.url} within {self.timeout}s", request_id
                )
                continue
            except requests.exceptions.RequestException as exc:
                last_error = TransportError(f"cannot reach {self.url}: {exc}", request_id)
                continue
            latency = time.perf_counter() - started
            return self._parse_response(response, latency, request_id)
        assert last_error is not None
        raise last_error

    def _parse_response(
        self, response: requests.Response, latency: float, request_id: str
    ) -> CompletionResult:
        if response.status_code != 200:
            raise ProtocolError(
                f"endpoint returned HTTP {response.status_code}", request_id
            )
        try:
            payload = response.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed completion response: {exc}", request_id) from exc
        if not isinstance(text, str):
            raise ProtocolError("completion content is not a string", request_id)
        usage = payload.get("usage") or {}
        return CompletionResult(
            text=text,
            latency=latency,
            input_tokens=usage.get("prompt_tokens"),
            output_tokens=usage.get("completion_tokens"),
        )


@dataclass(frozen=True)
class _MockRule:
    response: str
    contains: str | None = None
    ordinal: int | None = None

    @property
    def matcher(self) -> tuple[str | None, int | None]:
        return (self.contains, self.ordinal)


class MockChatBackend:
    """Deterministic scripted backend for tests and offline runs.

    Rules are evaluated in registration order against each call; the first
    match wins.  A ``contains`` rule matches when its substring occurs in
    the request's user-role content; an ``ordinal`` rule fires only on the
    N-th call (1-based).  Unmatched calls return the default response.
    Identical request sequences always yield identical response sequences.
    """

    def __init__(self, default_response: str = "", latency: float = 0.001) -> None:
        self.default_response = default_response
        self.synthetic_latency = latency
        self._rules: list[_MockRule] = []
        self._calls = 0
        self._lock = threading.Lock()

    def register(
        self,
        response: str,
        *,
        contains: str | None = None,
        ordinal: int | None = None,
    ) -> None:
        """Add a matching rule; exactly one of contains/ordinal must be given."""
        if (contains is None) == (ordinal is None):
            raise ValueError("specify exactly one of contains= or ordinal=")
        if ordinal is not None and ordinal < 1:
            raise ValueError("ordinal is 1-based")
        rule = _MockRule(response=response, contains=contains, ordinal=ordinal)
        if any(existing.matcher == rule.matcher for existing in self._rules):
            raise DuplicateRuleError(f"matcher {rule.matcher!r} registered twice")
        self._rules.append(rule)

    @property
    def call_count(self) -> int:
        return self._calls

    def complete(self, request: CompletionRequest) -> CompletionResult:
        with self._lock:
            self._calls += 1
            call_number = self._calls
        user_text = "\n".join(m.content for m in request.messages if m.role == "user")
        for rule in self._rules:
            if rule.contains is not None and rule.contains in user_text:
                return CompletionResult(text=rule.response, latency=self.synthetic_latency)
            if rule.ordinal is not None and rule.ordinal == call_number:
                return CompletionResult(text=rule.response, latency=self.synthetic_latency)
        return CompletionResult(text=self.default_response, latency=self.synthetic_latency)


def load_mock_script(path: str | Path) -> MockChatBackend:
    """Build a mock backend from a JSON script file.

    Schema: ``{"default": str, "rules": [{"contains"|"ordinal": ..., "response": str}]}``.
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    mock = MockChatBackend(default_response=data.get("default", ""))
    for rule in data.get("rules", []):
        mock.register(
            rule["response"],
            contains=rule.get("contains"),
            ordinal=rule.get("ordinal"),
        )
    return mock


def create_backend(
    url: str,
    *,
    timeout: float = 60.0,
    retries: int = 2,
    backoff: float = 0.25,
) -> ChatBackend:
    """Build a backend from a URL: ``mock://<script.json>`` or an HTTP endpoint."""
    if url.startswith(MOCK_URL_SCHEME):
        return load_mock_script(url[len(MOCK_URL_SCHEME):])
    return HttpChatBackend(url, timeout=timeout, retries=retries, backoff=backoff)
