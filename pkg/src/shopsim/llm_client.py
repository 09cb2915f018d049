"""Chat-completion and judge backends.

One wire shape (the de-facto messages/tools JSON convention) for remote
backends, plus deterministic scripted backends so every test and fixture run
works without network. Attachments are opaque image references passed
through untouched.
"""

from __future__ import annotations

import re
import threading
import time
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from .errors import ConfigurationError, JudgeParseError, TransportError

__all__ = [
    "ChatBackendConfig",
    "ChatMessage",
    "ChatExchange",
    "BackendToolCall",
    "ChatResponse",
    "ChatBackend",
    "ScriptedChatBackend",
    "HTTPChatBackend",
    "judge_score",
    "DEFAULT_JUDGE_RUBRIC",
]


@dataclass(frozen=True)
class ChatBackendConfig:
    endpoint: str = ""
    model_id: str = ""
    temperature: float = 0.7
    repetition_penalty: float = 1.1
    max_retries: int = 2
    timeout: float = 60.0
    api_key_env: str | None = None
    # Some hosted APIs reject sampling overrides; the adapter then pins 1.0.
    temperature_locked: bool = False
    backoff: float = 0.5

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigurationError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be >= 0")

    @property
    def effective_temperature(self) -> float:
        return 1.0 if self.temperature_locked else self.temperature


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant | tool
    text: str
    attachments: tuple[str, ...] = ()


@dataclass(frozen=True)
class BackendToolCall:
    function: str
    arguments: Mapping[str, str]


@dataclass(frozen=True)
class ChatResponse:
    text: str
    tool_calls: tuple[BackendToolCall, ...] = ()


@dataclass(frozen=True)
class ChatExchange:
    messages: tuple[ChatMessage, ...]
    tools_offered: tuple[Mapping, ...] = ()

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("exchange needs at least one message")


class ChatBackend(Protocol):
    def complete(self, exchange: ChatExchange) -> ChatResponse: ...


class ScriptedChatBackend:
    """Replays a fixed queue of responses; fully deterministic.

    Accepts plain strings or ChatResponse values. Queue access is
    serialized so concurrent callers still see the scripted order.
    """

    def __init__(self, replies: Sequence[str | ChatResponse]) -> None:
        self._replies = list(replies)
        self._lock = threading.Lock()
        self.calls: list[ChatExchange] = []

    def complete(self, exchange: ChatExchange) -> ChatResponse:
        with self._lock:
            self.calls.append(exchange)
            if not self._replies:
                raise TransportError("scripted backend exhausted its reply queue")
            reply = self._replies.pop(0)
        if isinstance(reply, str):
            return ChatResponse(text=reply)
        return reply


class EchoChatBackend:
    """Echoes the last user message; handy in tests."""

    def complete(self, exchange: ChatExchange) -> ChatResponse:
        for message in reversed(exchange.messages):
            if message.role == "user":
                return ChatResponse(text=message.text)
        return ChatResponse(text="")


class HTTPChatBackend:
    """Remote chat-completion client with retry/backoff.

    Transient transport failures and 5xx responses are retried up to
    ``max_retries`` with exponential backoff; 4xx responses are configuration
    errors and never retried.
    """

    def __init__(self, config: ChatBackendConfig) -> None:
        if not config.endpoint:
            raise ConfigurationError("HTTP backend needs an endpoint URL")
        self.config = config

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env:
            import os

            key = os.environ.get(self.config.api_key_env)
            if not key:
                raise ConfigurationError(
                    f"API key environment variable {self.config.api_key_env!r} is not set")
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _payload(self, exchange: ChatExchange) -> dict:
        messages = []
        for m in exchange.messages:
            if m.attachments:
                content: object = [{"type": "text", "text": m.text}] + [
                    {"type": "image_url", "image_url": {"url": ref}}
                    for ref in m.attachments
                ]
            else:
                content = m.text
            messages.append({"role": m.role, "content": content})
        payload: dict = {
            "model": self.config.model_id,
            "messages": messages,
            "temperature": self.config.effective_temperature,
        }
        if not self.config.temperature_locked:
            payload["repetition_penalty"] = self.config.repetition_penalty
        if exchange.tools_offered:
            payload["tools"] = list(exchange.tools_offered)
        return payload

    def complete(self, exchange: ChatExchange) -> ChatResponse:
        import requests

        headers = self._headers()
        payload = self._payload(exchange)
        last_exc: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                resp = requests.post(self.config.endpoint, json=payload,
                                     headers=headers, timeout=self.config.timeout)
                if 400 <= resp.status_code < 500:
                    raise ConfigurationError(
                        f"chat endpoint rejected the request: HTTP {resp.status_code}")
                if resp.status_code >= 500:
                    raise TransportError(f"chat server error {resp.status_code}")
                data = resp.json()
                message = data["choices"][0]["message"]
                tool_calls = tuple(
                    BackendToolCall(
                        function=tc["function"]["name"],
                        arguments=_decode_arguments(tc["function"].get("arguments")),
                    )
                    for tc in message.get("tool_calls") or ()
                )
                return ChatResponse(text=message.get("content") or "",
                                    tool_calls=tool_calls)
            except ConfigurationError:
                raise
            except Exception as exc:
                last_exc = exc
                if attempt < self.config.max_retries:
                    time.sleep(self.config.backoff * (2 ** attempt))
        raise TransportError(f"chat request failed after retries: {last_exc}")


def _decode_arguments(raw: object) -> dict:
    if isinstance(raw, dict):
        return raw
    if isinstance(raw, str) and raw.strip():
        import json

        try:
            decoded = json.loads(raw)
            if isinstance(decoded, dict):
                return decoded
        except json.JSONDecodeError:
            pass
    return {}


DEFAULT_JUDGE_RUBRIC = """\
You are grading a simulated shopper's reasoning in a retail conversation.

Read the persona and the conversation below. Score how coherently the
shopper's stated reasoning connects its persona constraints (budget,
preferences, dealbreakers) to its final decision:
- 1.0: every decision step is grounded in a stated constraint.
- 0.5: partially grounded; some leaps or ignored constraints.
- 0.0: reasoning contradicts the constraints or is absent.

{trajectory}

End your reply with a line of the form:
SCORE: <decimal between 0 and 1>
"""

_SCORE_LINE = re.compile(r"SCORE:\s*(-?\d+(?:\.\d+)?)", re.IGNORECASE)
_ANY_NUMBER = re.compile(r"-?\d+(?:\.\d+)?")


def judge_score(backend: ChatBackend, rubric: str, trajectory_rendering: str) -> float:
    """Ask a judge backend for a numeric verdict in [0, 1].

    The rubric pins the verdict format to a trailing ``SCORE: <decimal>``
    line; the last such line wins. A bare number is accepted as a fallback.
    Unparseable verdicts raise, never default silently.
    """
    if not rubric.strip():
        raise ValueError("rubric must be non-empty")
    prompt = rubric.replace("{trajectory}", trajectory_rendering)
    response = backend.complete(ChatExchange(messages=(
        ChatMessage(role="user", text=prompt),
    )))
    matches = _SCORE_LINE.findall(response.text)
    if not matches:
        stripped = response.text.strip()
        if _ANY_NUMBER.fullmatch(stripped):
            matches = [stripped]
    if not matches:
        raise JudgeParseError(
            f"judge verdict has no parseable score: {response.text[:200]!r}")
    return min(1.0, max(0.0, float(matches[-1])))
