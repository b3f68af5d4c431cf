"""Retry loop shared by the chat and retrieval HTTP clients."""

from __future__ import annotations

import logging
from typing import Callable

import httpx

logger = logging.getLogger(__name__)

RETRY_STATUS = frozenset({408, 429, 500, 502, 503, 504})


class RetryExhausted(RuntimeError):
    def __init__(self, message: str, status_code: int | None = None):
        super().__init__(message)
        self.status_code = status_code


def send_with_retry(
    send: Callable[[], httpx.Response],
    retries: int = 3,
    backoff: float = 1.0,
    sleep: Callable[[float], None] | None = None,
    what: str = "request",
) -> httpx.Response:
    """Call ``send`` until it returns a non-retryable response.

    Transport errors and :data:`RETRY_STATUS` responses are retried up to
    ``retries`` times with exponential backoff (``backoff``, ``2*backoff``,
    ...).  Any other response, including 4xx, is returned to the caller.
    """
    status = None
    last_error = "no attempt made"
    for attempt in range(retries + 1):
        if attempt and sleep is not None:
            sleep(backoff * 2 ** (attempt - 1))
        try:
            resp = send()
        except httpx.TransportError as exc:
            status = None
            last_error = f"{type(exc).__name__}: {exc}"
            logger.warning("%s failed (attempt %d): %s", what, attempt + 1, last_error)
            continue
        if resp.status_code not in RETRY_STATUS:
            return resp
        status = resp.status_code
        last_error = f"HTTP {status}"
        logger.warning("%s got %s (attempt %d)", what, last_error, attempt + 1)
    raise RetryExhausted(f"{what} failed after {retries} retries: {last_error}", status)
