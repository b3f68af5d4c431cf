"""Chat-completion backends.

Two backends share the ``complete(request) -> str`` interface:

* :class:`ReplayBackend` serves recorded answers from
  ``<fixture_dir>/<prompt_hash>/<attempt_index>.txt`` and fails loudly when
  an answer is missing.
* :class:`HttpChatBackend` POSTs to an OpenAI-style chat-completions
  endpoint; the request and response field names are configurable.

:class:`RecordingBackend` wraps any backend and writes its answers in the
replay layout, which is how replay fixtures are produced.
"""

from __future__ import annotations

import hashlib
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Protocol

import httpx

from .httpretry import RetryExhausted, send_with_retry

logger = logging.getLogger(__name__)


class GatewayError(RuntimeError):
    pass


class UnrecordedInteraction(GatewayError):
    def __init__(self, prompt_hash: str, attempt_index: int, path: Path):
        super().__init__(
            f"unrecorded interaction: no fixture for prompt hash {prompt_hash} "
            f"attempt {attempt_index} (expected {path})"
        )
        self.prompt_hash = prompt_hash
        self.attempt_index = attempt_index


@dataclass(frozen=True)
class ChatRequest:
    prompt: str
    temperature: float = 0.0
    max_output_chars: int = 8000
    model_name: str = ""
    attempt_index: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.attempt_index < 0:
            raise ValueError("attempt_index must be >= 0")
        if self.max_output_chars < 1:
            raise ValueError("max_output_chars must be positive")


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:24]


def complete(request: ChatRequest, backend: ChatBackend) -> str:
    return backend.complete(request)


class ReplayBackend:
    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)
        if not self.fixture_dir.is_dir():
            raise GatewayError(f"replay fixture directory not found: {self.fixture_dir}")

    def fixture_path(self, request: ChatRequest) -> Path:
        return self.fixture_dir / prompt_hash(request.prompt) / f"{request.attempt_index}.txt"

    def complete(self, request: ChatRequest) -> str:
        path = self.fixture_path(request)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise UnrecordedInteraction(prompt_hash(request.prompt), request.attempt_index, path) from None
        return text[: request.max_output_chars]


class RecordingBackend:
    """Forward to ``inner`` and store each answer as a replay fixture.

    A ``prompt.txt`` copy is written next to the answers to keep fixture
    directories reviewable.
    """

    def __init__(self, inner: ChatBackend, fixture_dir: str | Path):
        self.inner = inner
        self.fixture_dir = Path(fixture_dir)
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> str:
        answer = self.inner.complete(request)
        folder = self.fixture_dir / prompt_hash(request.prompt)
        with self._lock:
            folder.mkdir(parents=True, exist_ok=True)
            (folder / "prompt.txt").write_text(request.prompt, encoding="utf-8")
            (folder / f"{request.attempt_index}.txt").write_text(answer, encoding="utf-8")
        return answer


def _dig(payload: Any, path: str) -> Any:
    for key in path.split("."):
        if isinstance(payload, list):
            payload = payload[int(key)]
        else:
            payload = payload[key]
    return payload


class HttpChatBackend:
    """Chat completion over HTTP with retry and a bound on concurrent requests.

    Defaults match the OpenAI-compatible wire shape::

        POST {endpoint}
        {"model": ..., "messages": [{"role": "user", "content": prompt}],
         "temperature": ...}
        -> {"choices": [{"message": {"content": "..."}}]}
    """

    def __init__(
        self,
        endpoint: str,
        model: str = "",
        api_key: str | None = None,
        api_key_env: str = "LLM_API_KEY",
        response_path: str = "choices.0.message.content",
        extra_body: dict[str, Any] | None = None,
        retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 30.0,
        max_in_flight: int = 4,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(api_key_env)
        self.response_path = response_path
        self.extra_body = dict(extra_body or {})
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _payload(self, request: ChatRequest) -> dict[str, Any]:
        body = {
            "model": request.model_name or self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
        }
        body.update(self.extra_body)
        return body

    def complete(self, request: ChatRequest) -> str:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        payload = self._payload(request)

        def send() -> httpx.Response:
            with self._slots:
                return self._client.post(self.endpoint, json=payload, headers=headers)

        try:
            resp = send_with_retry(send, self.retries, self.backoff, self.sleep, what="chat request")
        except RetryExhausted as exc:
            raise GatewayError(str(exc)) from exc
        if resp.status_code >= 400:
            raise GatewayError(f"chat endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            content = _dig(resp.json(), self.response_path)
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"unexpected chat response shape ({self.response_path}): {exc}") from exc
        return str(content or "")[: request.max_output_chars]

    def close(self) -> None:
        self._client.close()
