"""Provider-agnostic chat-completion access.

One Gateway wraps one provider (the scripted mock or an OpenAI-style HTTP
endpoint) and adds what the rest of the system relies on: bounded retry of
transient transport failures, validate-and-regenerate constrained output,
a per-provider rate limiter, and an audit log with one entry per provider
call (in memory, mirrored to JSONL when a path is given).
"""

from __future__ import annotations

import enum
import json
import math
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import httpx


class GatewayError(Exception):
    """Base class for completion-layer errors."""


class TransportError(GatewayError):
    """Endpoint unreachable or persistently failing after retries."""


class AuthError(GatewayError):
    """Credentials rejected; retrying cannot help."""


class ProviderRefusal(GatewayError):
    """The provider rejected the request body itself."""


class ConstraintExhausted(GatewayError):
    """No conforming output within the attempt budget."""

    def __init__(self, message: str, last_raw: str):
        super().__init__(message)
        self.last_raw = last_raw


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant
    content: str


def system(content: str) -> Message:
    return Message("system", content)


def user(content: str) -> Message:
    return Message("user", content)


def assistant(content: str) -> Message:
    return Message("assistant", content)


@dataclass(frozen=True)
class CompletionRequest:
    messages: tuple[Message, ...]
    temperature: float | None = None  # None = provider default
    max_tokens: int = 512
    model: str = "default"

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a completion request needs at least one message")
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def with_temperature(self, temperature: float) -> "CompletionRequest":
        return CompletionRequest(self.messages, temperature, self.max_tokens, self.model)

    def extend(self, *messages: Message) -> "CompletionRequest":
        return CompletionRequest(
            self.messages + tuple(messages), self.temperature, self.max_tokens, self.model
        )

    def text(self) -> str:
        """Flat rendering used by scripted-mock matchers."""
        return "\n".join(f"{m.role}: {m.content}" for m in self.messages)


class ConstraintKind(str, enum.Enum):
    CHOICE_SET = "choice-set"
    INTEGER = "integer-pattern"
    REAL = "real-pattern"
    BOOLEAN = "boolean"
    BOOL_ARRAY = "bool-array"


_BOOL_RE = re.compile(r"^(true|false)[.!]?$", re.IGNORECASE)
_INT_RE = re.compile(r"^[+-]?\d+$")
_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)


def strip_code_fence(text: str) -> str:
    stripped = text.strip()
    match = _FENCE_RE.match(stripped)
    return match.group(1).strip() if match else stripped


@dataclass(frozen=True)
class OutputConstraint:
    kind: ConstraintKind
    choices: tuple[str, ...] = ()
    length: int = 0

    def __post_init__(self) -> None:
        if self.kind is ConstraintKind.CHOICE_SET and not self.choices:
            raise ValueError("a choice-set constraint needs choices")
        if self.kind is ConstraintKind.BOOL_ARRAY and self.length < 1:
            raise ValueError("a boolean-array constraint needs length >= 1")

    def validate(self, raw: str):
        """Parse raw model output into the constrained value, or raise
        ValueError. Accepts the canonical form up to whitespace, case for
        booleans/choices, and an optional code fence."""
        text = strip_code_fence(raw)
        if self.kind is ConstraintKind.BOOLEAN:
            match = _BOOL_RE.match(text)
            if not match:
                raise ValueError(f"not a boolean: {raw!r}")
            return match.group(1).lower() == "true"
        if self.kind is ConstraintKind.INTEGER:
            if not _INT_RE.match(text):
                raise ValueError(f"not an integer: {raw!r}")
            return int(text)
        if self.kind is ConstraintKind.REAL:
            try:
                value = float(text)
            except ValueError:
                raise ValueError(f"not a number: {raw!r}") from None
            if not math.isfinite(value):
                raise ValueError(f"not a finite number: {raw!r}")
            return value
        if self.kind is ConstraintKind.CHOICE_SET:
            folded = text.strip().casefold()
            for choice in self.choices:
                if choice.strip().casefold() == folded:
                    return choice
            raise ValueError(f"not one of the allowed choices: {raw!r}")
        # boolean array, e.g. "[true, false, true]" (Python-style casing too)
        try:
            parsed = json.loads(text.lower())
        except json.JSONDecodeError:
            raise ValueError(f"not a boolean array: {raw!r}") from None
        if (
            not isinstance(parsed, list)
            or len(parsed) != self.length
            or not all(isinstance(v, bool) for v in parsed)
        ):
            raise ValueError(f"not a boolean array of length {self.length}: {raw!r}")
        return parsed


def choice_set(*choices: str) -> OutputConstraint:
    return OutputConstraint(ConstraintKind.CHOICE_SET, choices=tuple(choices))


def integer_output() -> OutputConstraint:
    return OutputConstraint(ConstraintKind.INTEGER)


def real_output() -> OutputConstraint:
    return OutputConstraint(ConstraintKind.REAL)


def boolean_output() -> OutputConstraint:
    return OutputConstraint(ConstraintKind.BOOLEAN)


def bool_array_output(length: int) -> OutputConstraint:
    return OutputConstraint(ConstraintKind.BOOL_ARRAY, length=length)


class Provider(Protocol):
    name: str

    def complete(self, request: CompletionRequest) -> str: ...


Matcher = Callable[[CompletionRequest], bool]


def _as_matcher(matcher: str | Matcher) -> Matcher:
    if callable(matcher):
        return matcher
    return lambda request: matcher in request.text()


class ScriptError(AssertionError):
    """A scripted mock saw a request no remaining rule matches."""


class MockProvider:
    """Deterministic provider scripted as an ordered, consumable list of
    (matcher, response) rules: each call consumes the first unused rule
    whose matcher accepts the request."""

    name = "mock"

    def __init__(self, script: Sequence[tuple[str | Matcher, str]] = ()):
        self._script: list[tuple[Matcher, str]] = [(_as_matcher(m), r) for m, r in script]
        self._used: list[bool] = [False] * len(self._script)
        self.calls: list[CompletionRequest] = []

    def add(self, matcher: str | Matcher, response: str) -> "MockProvider":
        self._script.append((_as_matcher(matcher), response))
        self._used.append(False)
        return self

    def complete(self, request: CompletionRequest) -> str:
        self.calls.append(request)
        for index, (matcher, response) in enumerate(self._script):
            if not self._used[index] and matcher(request):
                self._used[index] = True
                return response
        raise ScriptError(
            f"no scripted response for request:\n{request.text()[:500]}"
        )

    @property
    def exhausted(self) -> bool:
        return all(self._used)


class HttpProvider:
    """OpenAI-style chat-completions endpoint. Credentials and base URL
    come from PROVIDER_API_KEY / PROVIDER_BASE_URL unless given."""

    name = "http"

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
        client: httpx.Client | None = None,
    ):
        self.base_url = (base_url or os.environ.get("PROVIDER_BASE_URL", "")).rstrip("/")
        if not self.base_url:
            raise ValueError("no provider base URL configured (PROVIDER_BASE_URL)")
        self.api_key = api_key if api_key is not None else os.environ.get("PROVIDER_API_KEY", "")
        self._client = client or httpx.Client(timeout=timeout)

    def complete(self, request: CompletionRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "max_tokens": request.max_tokens,
        }
        if request.temperature is not None:
            body["temperature"] = request.temperature
        try:
            response = self._client.post(
                f"{self.base_url}/chat/completions", json=body, headers=headers
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"request failed: {exc}") from exc
        if response.status_code in (401, 403):
            raise AuthError(f"provider rejected credentials ({response.status_code})")
        if response.status_code == 429 or response.status_code >= 500:
            raise TransportError(f"transient provider failure ({response.status_code})")
        if response.status_code >= 400:
            raise ProviderRefusal(f"provider refused request ({response.status_code})")
        try:
            payload = response.json()
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
            raise ProviderRefusal(f"malformed provider response: {exc}") from exc


class TokenBucket:
    """Per-provider rate limiter: `rate` request tokens per second up to
    `capacity`; acquire() sleeps until a token is available."""

    def __init__(
        self,
        rate: float,
        capacity: float | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self._clock = clock
        self._sleep = sleep
        self._tokens = self.capacity
        self._last = clock()

    def _refill(self) -> None:
        now = self._clock()
        self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
        self._last = now

    def acquire(self) -> None:
        self._refill()
        if self._tokens < 1.0:
            shortfall = (1.0 - self._tokens) / self.rate
            self._sleep(shortfall)
            self._refill()
            self._tokens = max(self._tokens, 1.0)
        self._tokens -= 1.0


DEFAULT_MAX_ATTEMPTS = 3


@dataclass
class AuditEntry:
    index: int
    provider: str
    model: str
    messages: tuple[Message, ...]
    response: str | None
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "provider": self.provider,
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "response": self.response,
            "error": self.error,
        }


@dataclass
class Gateway:
    provider: Provider
    max_retries: int = 3
    backoff_base: float = 0.5
    rate_limiter: TokenBucket | None = None
    audit_path: str | Path | None = None
    sleep: Callable[[float], None] = time.sleep
    audit_log: list[AuditEntry] = field(default_factory=list)

    def _audit(self, request: CompletionRequest, response: str | None, error: str | None) -> None:
        entry = AuditEntry(
            index=len(self.audit_log),
            provider=self.provider.name,
            model=request.model,
            messages=request.messages,
            response=response,
            error=error,
        )
        self.audit_log.append(entry)
        if self.audit_path is not None:
            with open(self.audit_path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps(entry.to_json()) + "\n")

    def complete(self, request: CompletionRequest) -> str:
        """One completion; transient transport failures are retried with
        exponential backoff, then surface as TransportError."""
        last_error: TransportError | None = None
        for attempt in range(self.max_retries + 1):
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            try:
                response = self.provider.complete(request)
            except TransportError as exc:
                last_error = exc
                self._audit(request, None, str(exc))
                if attempt < self.max_retries:
                    self.sleep(self.backoff_base * (2**attempt))
                continue
            except (AuthError, ProviderRefusal) as exc:
                self._audit(request, None, str(exc))
                raise
            self._audit(request, response, None)
            return response
        raise TransportError(
            f"provider still failing after {self.max_retries + 1} attempts: {last_error}"
        )

    def complete_constrained(
        self,
        request: CompletionRequest,
        constraint: OutputConstraint,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    ):
        """Validate-and-regenerate: re-issue the identical request (at
        temperature 0) until the output satisfies the constraint, at most
        max_attempts times."""
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        pinned = request.with_temperature(0.0)
        last_raw = ""
        for _ in range(max_attempts):
            last_raw = self.complete(pinned)
            try:
                return constraint.validate(last_raw)
            except ValueError:
                continue
        raise ConstraintExhausted(
            f"no output satisfying {constraint.kind.value} in {max_attempts} attempts",
            last_raw=last_raw,
        )

    def complete_two_pass(
        self,
        request: CompletionRequest,
        extraction_instruction: str,
        constraint: OutputConstraint,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    ):
        """Free-form reasoning pass, then a constrained extraction pass on
        the transcript extended with the reasoning and the instruction."""
        reasoning = self.complete(request)
        extraction = request.extend(assistant(reasoning), user(extraction_instruction))
        value = self.complete_constrained(extraction, constraint, max_attempts)
        return reasoning, value
