"""LLM gateway abstraction.

A gateway turns (prompt, generation parameters) into a response text
and knows which model identity it speaks for, which is what provenance
stamping needs. Mock gateways keep the forging pipeline hermetic for
tests; the HTTP gateway talks to any OpenAI-style chat endpoint with
credentials taken from the environment only.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, runtime_checkable

from .errors import ConfigError, GatewayError
from .taxonomy import SourceLabel


@dataclass(frozen=True)
class GenerationParams:
    """Decoding knobs recorded into forged-record metadata."""

    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: Optional[int] = None

    def to_dict(self) -> dict:
        return {"temperature": self.temperature, "top_p": self.top_p, "max_tokens": self.max_tokens}


@dataclass(frozen=True)
class RetryPolicy:
    """Bounded exponential backoff for flaky gateways."""

    max_attempts: int = 3
    base_delay: float = 0.05
    max_delay: float = 2.0

    def delay(self, attempt: int) -> float:
        return min(self.base_delay * (2 ** attempt), self.max_delay)


@runtime_checkable
class LlmGateway(Protocol):
    """What forging and the LLM detector need from an endpoint."""

    name: str
    model: SourceLabel

    def complete(self, prompt: str, params: GenerationParams) -> str: ...


def call_with_retry(
    gateway: LlmGateway,
    prompt: str,
    params: GenerationParams,
    policy: RetryPolicy = RetryPolicy(),
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Invoke a gateway, retrying transient failures with backoff."""
    last: Exception | None = None
    for attempt in range(policy.max_attempts):
        try:
            return gateway.complete(prompt, params)
        except Exception as exc:  # noqa: BLE001 - endpoint errors are opaque
            last = exc
            if attempt + 1 < policy.max_attempts:
                sleep(policy.delay(attempt))
    raise GatewayError(
        f"gateway {gateway.name!r} failed after {policy.max_attempts} attempts: {last}"
    ) from last


@dataclass
class MockGateway:
    """Deterministic in-process gateway driven by a response function."""

    model: SourceLabel
    respond: Callable[[str, GenerationParams], str]
    name: str = "mock"

    def complete(self, prompt: str, params: GenerationParams) -> str:
        return self.respond(prompt, params)


def canned_mock(model: SourceLabel, response: str, name: str = "mock") -> MockGateway:
    """Gateway that returns a fixed response regardless of the prompt."""
    return MockGateway(model=model, respond=lambda prompt, params: response, name=name)


@dataclass
class FlakyGateway:
    """Test double that fails a set number of times before delegating."""

    inner: MockGateway
    failures: int
    calls: int = 0

    @property
    def name(self) -> str:
        return self.inner.name

    @property
    def model(self) -> SourceLabel:
        return self.inner.model

    def complete(self, prompt: str, params: GenerationParams) -> str:
        self.calls += 1
        if self.calls <= self.failures:
            raise ConnectionError(f"simulated outage #{self.calls}")
        return self.inner.complete(prompt, params)


class HttpGateway:
    """OpenAI-style chat-completions endpoint.

    The API key is read from ``api_key_env`` at call time; config files
    never carry credentials.
    """

    def __init__(
        self,
        model: SourceLabel,
        url: str,
        model_name: str,
        api_key_env: str = "REVIEWDET_API_KEY",
        name: str = "http",
        timeout: float = 120.0,
    ):
        self.model = model
        self.url = url
        self.model_name = model_name
        self.api_key_env = api_key_env
        self.name = name
        self.timeout = timeout

    def complete(self, prompt: str, params: GenerationParams) -> str:
        import requests

        key = os.environ.get(self.api_key_env)
        if not key:
            raise ConfigError(f"environment variable {self.api_key_env} is not set")
        body = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_p": params.top_p,
        }
        if params.max_tokens is not None:
            body["max_tokens"] = params.max_tokens
        resp = requests.post(
            self.url,
            json=body,
            headers={"Authorization": f"Bearer {key}"},
            timeout=self.timeout,
        )
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]


_MOCK_BEHAVIORS = ("echo", "uppercase_review", "identity_review")


def gateway_from_config(entry: dict) -> LlmGateway:
    """Build a gateway from one config-file entry."""
    from .forge import identity_review_mock, uppercase_review_mock  # avoid cycle at import

    kind = entry.get("kind")
    try:
        model = SourceLabel(entry["model"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"gateway entry needs a valid 'model': {exc}") from exc
    name = entry.get("name", kind or "gateway")
    if kind == "mock":
        behavior = entry.get("behavior", "echo")
        if behavior == "echo":
            return MockGateway(model=model, respond=lambda prompt, params: prompt, name=name)
        if behavior == "uppercase_review":
            return uppercase_review_mock(model, name=name)
        if behavior == "identity_review":
            return identity_review_mock(model, name=name)
        raise ConfigError(f"unknown mock behavior {behavior!r}; choose from {_MOCK_BEHAVIORS}")
    if kind == "http":
        return HttpGateway(
            model=model,
            url=entry["url"],
            model_name=entry["model_name"],
            api_key_env=entry.get("api_key_env", "REVIEWDET_API_KEY"),
            name=name,
        )
    raise ConfigError(f"unknown gateway kind {kind!r}")
