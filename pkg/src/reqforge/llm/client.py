"""Chat clients: a chat-completions HTTP client and a scripted replayer.

Both expose a single complete(messages) -> str method. The scripted client
serves canned replies from a fixture file, matched by conversation digest
first and ordinal position second, which keeps offline runs reproducible.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol, Sequence

from ..errors import ClientError

VALID_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in VALID_ROLES:
            raise ValueError(f"unknown chat role {self.role!r}")


class ChatClient(Protocol):
    def complete(self, messages: Sequence[ChatMessage]) -> str:
        ...


def messages_to_wire(messages: Sequence[ChatMessage]) -> list[dict[str, str]]:
    return [{"role": m.role, "content": m.content} for m in messages]


def messages_digest(messages: Sequence[ChatMessage]) -> str:
    payload = json.dumps(messages_to_wire(messages), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class ScriptedClient:
    """Replays canned replies; raises ClientError when the script runs out."""

    replies: list[str] = field(default_factory=list)
    by_digest: dict[str, str] = field(default_factory=dict)
    transcript: list[list[dict[str, str]]] = field(default_factory=list)
    _cursor: int = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedClient":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(obj, dict):
            raise ClientError(f"{path}: script must be a JSON object")
        replies = obj.get("replies", [])
        by_digest = obj.get("by_digest", {})
        if not isinstance(replies, list) or any(
            not isinstance(r, str) for r in replies
        ):
            raise ClientError(f"{path}: 'replies' must be a list of strings")
        if not isinstance(by_digest, dict) or any(
            not isinstance(v, str) for v in by_digest.values()
        ):
            raise ClientError(f"{path}: 'by_digest' must map digests to strings")
        return cls(replies=list(replies), by_digest=dict(by_digest))

    @property
    def calls(self) -> int:
        return len(self.transcript)

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        self.transcript.append(messages_to_wire(messages))
        digest = messages_digest(messages)
        if digest in self.by_digest:
            return self.by_digest[digest]
        if self._cursor < len(self.replies):
            reply = self.replies[self._cursor]
            self._cursor += 1
            return reply
        raise ClientError("scripted client has no reply left for this turn")


@dataclass
class HttpChatClient:
    """Chat-completions JSON over HTTP(S).

    Temperature defaults to 0 for reproducibility. The credential is read
    from the environment, never stored in config files. A semaphore caps
    in-flight requests when callers share one client across threads.
    """

    endpoint: str
    model: str
    api_key_env: str = "REQFORGE_API_KEY"
    temperature: float = 0.0
    timeout_s: float = 60.0
    max_retries: int = 2
    max_in_flight: int = 4
    _gate: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self):
        self._gate = threading.Semaphore(self.max_in_flight)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        import requests

        body = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages_to_wire(messages),
        }
        last: Exception | None = None
        with self._gate:
            for attempt in range(self.max_retries + 1):
                try:
                    resp = requests.post(
                        self.endpoint,
                        json=body,
                        headers=self._headers(),
                        timeout=self.timeout_s,
                    )
                    resp.raise_for_status()
                    return self._content(resp.json())
                except (requests.RequestException, ClientError, ValueError) as exc:
                    last = exc
                    if attempt < self.max_retries:
                        time.sleep(min(2.0**attempt, 8.0))
        raise ClientError(f"chat completion failed after retries: {last}") from last

    @staticmethod
    def _content(payload: Any) -> str:
        try:
            content = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ClientError(f"unexpected completion payload: {exc}") from exc
        if not isinstance(content, str):
            raise ClientError("completion content is not a string")
        return content
