"""Pluggable text-completion backends.

Agents speak to a single text-in/text-out interface so every agent test
can run offline: a scripted stub for unit tests, a recording/replaying
cassette for deterministic CI, and an HTTP client for real endpoints.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

PROVIDER_URL_VAR = "ESCAPEROOM_PROVIDER_URL"
PROVIDER_KEY_VAR = "ESCAPEROOM_PROVIDER_KEY"
PROVIDER_MODEL_VAR = "ESCAPEROOM_PROVIDER_MODEL"


@dataclass(frozen=True)
class ProviderRequest:
    system: str
    user: str
    temperature: float = 0.0
    samples: int = 1

    def digest(self) -> str:
        payload = json.dumps(
            {"system": self.system, "user": self.user, "temperature": self.temperature},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:20]


@dataclass(frozen=True)
class ProviderResponse:
    text: str


class ProviderError(RuntimeError):
    """Transport or protocol failure talking to a completion backend."""


class TextProvider(Protocol):
    def complete(self, request: ProviderRequest) -> ProviderResponse: ...


class ScriptedProvider:
    """Deterministic stub: canned replies, or a callable on the request."""

    def __init__(self, replies: list[str] | None = None, responder: Callable | None = None):
        self.replies = list(replies or [])
        self.responder = responder
        self.requests: list[ProviderRequest] = []

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        self.requests.append(request)
        if self.responder is not None:
            return ProviderResponse(str(self.responder(request)))
        if not self.replies:
            raise ProviderError("scripted provider ran out of replies")
        return ProviderResponse(self.replies.pop(0))


class ReplayProvider:
    """Cassette-backed provider: request digest -> recorded response.

    With an inner provider attached, unseen requests are forwarded and
    their responses recorded; without one, a miss is an error so CI stays
    deterministic.
    """

    def __init__(self, cassette_path: str | Path, inner: TextProvider | None = None):
        self.path = Path(cassette_path)
        self.inner = inner
        self._cassette: dict[str, str] = {}
        if self.path.exists():
            self._cassette = json.loads(self.path.read_text(encoding="utf-8"))

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        key = request.digest()
        if key in self._cassette:
            return ProviderResponse(self._cassette[key])
        if self.inner is None:
            raise ProviderError(f"cassette {self.path} has no response for digest {key}")
        response = self.inner.complete(request)
        self._cassette[key] = response.text
        self.path.write_text(
            json.dumps(self._cassette, indent=2, sort_keys=True), encoding="utf-8"
        )
        return response


class HTTPProvider:
    """Chat-completions endpoint configured through environment variables.

    ESCAPEROOM_PROVIDER_URL   full chat-completions URL
    ESCAPEROOM_PROVIDER_KEY   bearer token (optional)
    ESCAPEROOM_PROVIDER_MODEL model name sent in the payload
    """

    def __init__(
        self,
        url: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        timeout: float = 60.0,
    ):
        self.url = url or os.environ.get(PROVIDER_URL_VAR)
        self.api_key = api_key or os.environ.get(PROVIDER_KEY_VAR)
        self.model = model or os.environ.get(PROVIDER_MODEL_VAR, "default")
        self.timeout = timeout
        if not self.url:
            raise ProviderError(f"{PROVIDER_URL_VAR} is not set")

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "temperature": request.temperature,
            "n": request.samples,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        }
        try:
            response = httpx.post(self.url, json=payload, headers=headers, timeout=self.timeout)
            response.raise_for_status()
            body = response.json()
            return ProviderResponse(body["choices"][0]["message"]["content"])
        except httpx.HTTPError as exc:
            raise ProviderError(f"provider request failed: {exc}") from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc
