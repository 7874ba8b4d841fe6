"""HTTP transport to model endpoints plus a deterministic mock backend.

Vision endpoints receive OpenAI-style multimodal chat-completion requests
with the image attached as a base64 data URL; text endpoints receive plain
chat completions. Every call is wrapped so transport failures become
failed records instead of exceptions, keeping batch runs fault-isolated.
"""

from __future__ import annotations

import base64
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

MOCK_SCHEME = "mock://"


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.3
    top_p: float = 0.9
    max_tokens: int = 300
    context_length: int = 4096

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class ModelEndpoint:
    label: str
    base_url: str
    model_name: str = ""
    kind: str = "vision"  # "vision" or "text"
    declared_size_gb: float | None = None
    declared_bits: int | None = None

    def __post_init__(self):
        if not self.label:
            raise ValueError("endpoint label must be nonempty")
        if self.kind not in ("vision", "text"):
            raise ValueError(f"endpoint kind must be vision or text, got {self.kind!r}")

    @property
    def is_mock(self) -> bool:
        return self.base_url.startswith(MOCK_SCHEME)


@dataclass
class DescriptionRecord:
    """One model description of one image, with timing."""

    image_id: str
    endpoint_label: str
    text: str
    inference_seconds: float
    success: bool
    char_length: int = -1
    error_detail: str | None = None
    attempts: int = 1

    def __post_init__(self):
        if self.char_length < 0:
            self.char_length = len(self.text)
        if self.char_length != len(self.text):
            raise ValueError("char_length must equal the Unicode length of text")
        if self.success and (not self.text or self.inference_seconds <= 0):
            raise ValueError("successful records need nonempty text and positive timing")


@dataclass
class CompletionResult:
    """Raw text completion with timing, for the structuring endpoint."""

    text: str
    seconds: float
    success: bool
    error_detail: str | None = None
    attempts: int = 1


def build_vision_request(model_name: str, prompt: str, image_bytes: bytes,
                         sampling: SamplingParams) -> dict:
    b64 = base64.b64encode(image_bytes).decode("ascii")
    return {
        "model": model_name,
        "messages": [
            {
                "role": "user",
                "content": [
                    {"type": "text", "text": prompt},
                    {
                        "type": "image_url",
                        "image_url": {"url": f"data:image/png;base64,{b64}"},
                    },
                ],
            }
        ],
        "temperature": sampling.temperature,
        "top_p": sampling.top_p,
        "max_tokens": sampling.max_tokens,
    }


def build_text_request(model_name: str, prompt: str, sampling: SamplingParams) -> dict:
    return {
        "model": model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": sampling.temperature,
        "top_p": sampling.top_p,
        "max_tokens": sampling.max_tokens,
    }


def serialize_request(body: dict) -> bytes:
    """Canonical byte serialization; identical inputs give identical bytes."""
    return json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")


class MockBackend:
    """In-process stand-in for a model endpoint.

    ``fixtures`` maps an image id (or sha256 content hash, when
    ``key_by="content_hash"``) to ``(text, latency_seconds)``. Responses
    are byte-stable across runs; the configured latency is reported as the
    inference time so that downstream reports are reproducible.
    """

    def __init__(self, fixtures: dict[str, tuple[str, float]],
                 key_by: str = "image_id",
                 fallback_text: str | None = None,
                 fail_unknown: bool = False,
                 completion_text: str = ""):
        if not fixtures and not completion_text:
            raise ValueError("fixture map must be nonempty")
        if key_by not in ("image_id", "content_hash"):
            raise ValueError(f"unknown key_by: {key_by!r}")
        self.fixtures = dict(fixtures)
        self.key_by = key_by
        self.fallback_text = fallback_text
        self.fail_unknown = fail_unknown
        self.completion_text = completion_text

    @classmethod
    def load(cls, path: str | Path) -> "MockBackend":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        fixtures = {
            key: (entry["text"], float(entry.get("latency", 0.0)))
            for key, entry in raw.get("fixtures", {}).items()
        }
        return cls(
            fixtures,
            key_by=raw.get("key_by", "image_id"),
            fallback_text=raw.get("fallback_text"),
            fail_unknown=bool(raw.get("fail_unknown", False)),
            completion_text=raw.get("completion_text", ""),
        )

    def lookup(self, image_id: str, image_bytes: bytes) -> tuple[str, float] | None:
        key = image_id
        if self.key_by == "content_hash":
            key = hashlib.sha256(image_bytes).hexdigest()
        if key in self.fixtures:
            return self.fixtures[key]
        if self.fail_unknown:
            return None
        if self.fallback_text is not None:
            return self.fallback_text, 0.0
        return None


class ModelClient:
    """Shared client for vision description and text completion requests."""

    def __init__(self, timeout: float = 120.0, retries: int = 1,
                 mock_backends: dict[str, MockBackend] | None = None,
                 session: requests.Session | None = None):
        self.timeout = timeout
        self.retries = retries
        self.mock_backends = mock_backends or {}
        self.session = session or requests.Session()

    def _mock_for(self, endpoint: ModelEndpoint) -> MockBackend:
        if endpoint.label in self.mock_backends:
            return self.mock_backends[endpoint.label]
        backend = MockBackend.load(endpoint.base_url[len(MOCK_SCHEME):])
        self.mock_backends[endpoint.label] = backend
        return backend

    def _post_chat(self, endpoint: ModelEndpoint, body: dict) -> tuple[str, float, int]:
        """POST a chat completion; returns (content, seconds, attempts).

        Retries transport errors only; HTTP error statuses are not retried.
        Reported seconds cover only the successful attempt.
        """
        url = endpoint.base_url.rstrip("/") + "/v1/chat/completions"
        payload = serialize_request(body)
        last_exc: Exception | None = None
        for attempt in range(1, self.retries + 2):
            start = time.perf_counter()
            try:
                resp = self.session.post(
                    url,
                    data=payload,
                    headers={"Content-Type": "application/json"},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_exc = exc
                continue
            elapsed = time.perf_counter() - start
            if resp.status_code != 200:
                raise TransportError(
                    f"HTTP {resp.status_code}: {resp.text[:200]}", attempt
                )
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed response body: {exc}", attempt)
            return content, elapsed, attempt
        raise TransportError(f"transport failure: {last_exc}", self.retries + 1)

    def describe_image(self, image_id: str, image_bytes: bytes, prompt: str,
                       endpoint: ModelEndpoint,
                       sampling: SamplingParams) -> DescriptionRecord:
        if endpoint.kind != "vision":
            raise ValueError(f"endpoint {endpoint.label} is not a vision endpoint")
        if endpoint.is_mock:
            return self._mock_describe(image_id, image_bytes, endpoint)
        body = build_vision_request(endpoint.model_name, prompt, image_bytes, sampling)
        try:
            text, seconds, attempts = self._post_chat(endpoint, body)
        except TransportError as exc:
            return DescriptionRecord(
                image_id=image_id,
                endpoint_label=endpoint.label,
                text="",
                inference_seconds=0.0,
                success=False,
                error_detail=str(exc),
                attempts=exc.attempts,
            )
        if not text:
            return DescriptionRecord(
                image_id=image_id,
                endpoint_label=endpoint.label,
                text="",
                inference_seconds=0.0,
                success=False,
                error_detail="empty completion",
                attempts=attempts,
            )
        return DescriptionRecord(
            image_id=image_id,
            endpoint_label=endpoint.label,
            text=text,
            inference_seconds=seconds,
            success=True,
            attempts=attempts,
        )

    def _mock_describe(self, image_id: str, image_bytes: bytes,
                       endpoint: ModelEndpoint) -> DescriptionRecord:
        backend = self._mock_for(endpoint)
        start = time.perf_counter()
        hit = backend.lookup(image_id, image_bytes)
        measured = time.perf_counter() - start
        if hit is None:
            return DescriptionRecord(
                image_id=image_id,
                endpoint_label=endpoint.label,
                text="",
                inference_seconds=0.0,
                success=False,
                error_detail=f"no fixture for {image_id!r}",
            )
        text, latency = hit
        # configured latency is reported verbatim so mock runs are reproducible
        seconds = latency if latency > 0 else max(measured, 1e-6)
        return DescriptionRecord(
            image_id=image_id,
            endpoint_label=endpoint.label,
            text=text,
            inference_seconds=seconds,
            success=True,
        )

    def complete_text(self, prompt: str, endpoint: ModelEndpoint,
                      sampling: SamplingParams) -> CompletionResult:
        if endpoint.kind != "text":
            raise ValueError(f"endpoint {endpoint.label} is not a text endpoint")
        if endpoint.is_mock:
            backend = self._mock_for(endpoint)
            start = time.perf_counter()
            text = backend.completion_text
            seconds = max(time.perf_counter() - start, 1e-6)
            if not text:
                return CompletionResult("", 0.0, False, "mock has no completion_text")
            return CompletionResult(text, seconds, True)
        body = build_text_request(endpoint.model_name, prompt, sampling)
        try:
            text, seconds, attempts = self._post_chat(endpoint, body)
        except TransportError as exc:
            return CompletionResult("", 0.0, False, str(exc), exc.attempts)
        return CompletionResult(text, seconds, True, attempts=attempts)


class TransportError(Exception):
    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts
