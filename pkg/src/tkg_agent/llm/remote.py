"""OpenAI-compatible chat-completions client."""

from __future__ import annotations

import logging
import os
import time
from typing import Callable

import httpx

from .core import AuthFailure, BackendFailure, BackendTimeout, Completion, Prompt, RateLimitExhausted

logger = logging.getLogger(__name__)

API_KEY_ENV = "TKG_AGENT_API_KEY"
MAX_ATTEMPTS = 3
BACKOFF_BASE = 1.0
BACKOFF_FACTOR = 2.0


class RemoteBackend:
    name = "remote"

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        sleep: Callable[[float], None] = time.sleep,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout
        self.sleep = sleep
        self.attempts: list[dict] = []
        self._client = httpx.Client(timeout=timeout, transport=transport)

    @property
    def url(self) -> str:
        if self.endpoint.endswith("/chat/completions"):
            return self.endpoint
        return self.endpoint + "/chat/completions"

    def complete(self, prompt: Prompt) -> Completion:
        body = {
            "model": self.model,
            "messages": prompt.as_payload(),
            "temperature": prompt.temperature,
            "max_tokens": prompt.max_tokens,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        delay = BACKOFF_BASE
        last: Exception | None = None
        for attempt in range(1, MAX_ATTEMPTS + 1):
            started = time.perf_counter()
            try:
                resp = self._client.post(self.url, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last = BackendTimeout(f"request timed out after {self.timeout}s")
                self.attempts.append({"attempt": attempt, "error": "timeout"})
                logger.warning("LLM request timed out (attempt %d/%d): %s", attempt, MAX_ATTEMPTS, exc)
            except httpx.TransportError as exc:
                last = BackendFailure(f"transport error: {exc}")
                self.attempts.append({"attempt": attempt, "error": "transport"})
                logger.warning("LLM transport error (attempt %d/%d): %s", attempt, MAX_ATTEMPTS, exc)
            else:
                self.attempts.append({"attempt": attempt, "status": resp.status_code})
                if resp.status_code in (401, 403):
                    raise AuthFailure(f"backend rejected credentials (HTTP {resp.status_code})")
                if resp.status_code == 429:
                    last = RateLimitExhausted("rate limited after retries")
                elif resp.status_code >= 500:
                    last = BackendFailure(f"server error HTTP {resp.status_code}")
                elif resp.status_code >= 400:
                    raise BackendFailure(f"HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    return self._parse(resp, (time.perf_counter() - started) * 1000.0)
                logger.warning("LLM HTTP %d (attempt %d/%d)", resp.status_code, attempt, MAX_ATTEMPTS)
            if attempt < MAX_ATTEMPTS:
                self.sleep(delay)
                delay *= BACKOFF_FACTOR
        assert last is not None
        raise last

    def _parse(self, resp: httpx.Response, latency_ms: float) -> Completion:
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendFailure(f"malformed completion payload: {exc}") from None
        usage = data.get("usage") or {}
        return Completion(
            text=text or "",
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            backend=f"{self.name}:{self.model}",
            latency_ms=latency_ms,
        )

    def close(self) -> None:
        self._client.close()
