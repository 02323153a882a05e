"""JSON-over-HTTP with exponential backoff, shared by all remote bindings."""

from __future__ import annotations

import logging
import time

import httpx

from .errors import ServiceError, ServiceTimeout

log = logging.getLogger(__name__)

RETRY_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


def post_json(client: httpx.Client, url: str, payload: dict, *, headers: dict | None = None,
              attempts: int = 3, backoff: float = 0.5, timeout: float | None = None) -> dict:
    """POST ``payload`` and return the decoded JSON object.

    Transient failures (timeouts, connection errors, 429/5xx) are retried
    up to ``attempts`` total tries, sleeping ``backoff * 2**i`` in between.
    """
    last: Exception | None = None
    timed_out = False
    kwargs = {"timeout": timeout} if timeout is not None else {}
    for i in range(max(1, attempts)):
        if i:
            time.sleep(backoff * 2 ** (i - 1))
        try:
            resp = client.post(url, json=payload, headers=headers or {}, **kwargs)
        except httpx.TimeoutException as exc:
            last, timed_out = exc, True
            log.warning("POST %s timed out (attempt %d/%d)", url, i + 1, attempts)
            continue
        except httpx.TransportError as exc:
            last, timed_out = exc, False
            log.warning("POST %s failed: %s (attempt %d/%d)", url, exc, i + 1, attempts)
            continue
        if resp.status_code in RETRY_STATUS:
            last, timed_out = ServiceError(f"HTTP {resp.status_code}"), False
            log.warning("POST %s -> %d (attempt %d/%d)", url, resp.status_code, i + 1, attempts)
            continue
        if resp.status_code >= 400:
            raise ServiceError(f"POST {url} -> HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise ServiceError(f"POST {url}: response is not JSON") from exc
        if not isinstance(body, dict):
            raise ServiceError(f"POST {url}: expected a JSON object")
        return body
    if timed_out:
        raise ServiceTimeout(f"POST {url} timed out after {attempts} attempts") from last
    raise ServiceError(f"POST {url} failed after {attempts} attempts: {last}") from last
