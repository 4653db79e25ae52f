"""Pluggable chat and embedding backends.

Real runs talk to an OpenAI-style chat-completions endpoint; every test path
uses the deterministic implementations below (scripted replay, heuristic
mock chat, hash-based embeddings) so the whole pipeline works offline.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

from .errors import BackendError

DEFAULT_EMBEDDING_DIM = 64


@dataclass
class ChatTurn:
    """One assistant turn: plain text, or a tool invocation, or both."""

    text: str | None = None
    tool_name: str | None = None
    tool_args: dict | None = None
    prompt_tokens: int = 0
    completion_tokens: int = 0


class ChatBackend(Protocol):
    model_id: str
    price: dict | None  # optional {"prompt": $/tok, "completion": $/tok}

    def complete(self, messages: list[dict], temperature: float = 0.7,
                 tools: list[dict] | None = None) -> ChatTurn:
        ...


class EmbeddingBackend(Protocol):
    backend_id: str
    dim: int

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        ...


# --- deterministic mocks ---------------------------------------------------

class HashEmbeddingBackend:
    """Seeded hash-based unit vectors: stable across processes and runs.

    Each whitespace token contributes a pseudo-random vector derived from
    sha256(seed || token); the sum is normalized to unit length. Shared
    tokens between texts yield plausible similarity structure.
    """

    def __init__(self, dim: int = DEFAULT_EMBEDDING_DIM, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.backend_id = f"hash-v1-d{dim}-s{seed}"
        self._token_cache: dict[str, list[float]] = {}

    def _token_vector(self, token: str) -> list[float]:
        cached = self._token_cache.get(token)
        if cached is not None:
            return cached
        vec = []
        counter = 0
        material = f"{self.seed}\x00{token}".encode("utf-8")
        while len(vec) < self.dim:
            digest = hashlib.sha256(material + counter.to_bytes(4, "big")).digest()
            for i in range(0, 32, 8):
                if len(vec) >= self.dim:
                    break
                (u,) = struct.unpack(">Q", digest[i:i + 8])
                vec.append(u / 2**63 - 1.0)  # uniform in [-1, 1)
            counter += 1
        self._token_cache[token] = vec
        return vec

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        out = []
        for text in texts:
            tokens = text.lower().split() or ["<empty>"]
            acc = [0.0] * self.dim
            for token in tokens:
                tv = self._token_vector(token)
                for i in range(self.dim):
                    acc[i] += tv[i]
            norm = math.sqrt(sum(x * x for x in acc))
            if norm == 0.0:
                acc[0] = 1.0
                norm = 1.0
            out.append([x / norm for x in acc])
        return out


class ScriptedChatBackend:
    """Replays a declared list of assistant turns verbatim.

    Exhausting the script raises BackendError. Script files are JSON:
    either {"turns": [...]} or {"by_task": {id: [...]}, "default": [...]};
    each turn is {"text": ...} or {"thought": ..., "tool": ..., "params": {...}}.
    """

    def __init__(self, turns: list[dict], model_id: str = "scripted",
                 price: dict | None = None):
        self.model_id = model_id
        self.price = price
        self._turns = list(turns)
        self._pos = 0

    @classmethod
    def from_file(cls, path, task_id: str | None = None,
                  model_id: str = "scripted") -> "ScriptedChatBackend":
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
        if "turns" in spec:
            turns = spec["turns"]
        else:
            turns = spec.get("by_task", {}).get(task_id or "", spec.get("default", []))
        return cls(turns, model_id=model_id)

    def complete(self, messages, temperature=0.7, tools=None) -> ChatTurn:
        if self._pos >= len(self._turns):
            raise BackendError(f"{self.model_id}: script exhausted after {self._pos} turns")
        turn = self._turns[self._pos]
        self._pos += 1
        if turn.get("delay"):
            time.sleep(float(turn["delay"]))
        if "tool" in turn:
            return ChatTurn(text=turn.get("thought"), tool_name=turn["tool"],
                            tool_args=turn.get("params", {}))
        return ChatTurn(text=turn.get("text", ""))


class DeterministicChatBackend:
    """Heuristic offline chat model for summarization, judging, and
    key-point extraction. Output is a pure function of the prompt text.
    """

    def __init__(self, model_id: str = "mock-chat", summary_limit: int = 300,
                 price: dict | None = None):
        self.model_id = model_id
        self.price = price
        self.summary_limit = summary_limit

    def complete(self, messages, temperature=0.7, tools=None) -> ChatTurn:
        prompt = "\n".join(str(m.get("content", "")) for m in messages)
        if "Format your response into two lines" in prompt:
            return ChatTurn(text="Thoughts: all key points are covered by the "
                                 "tool call history.\nStatus: success")
        if "extract the critical elements explicitly mentioned" in prompt.lower() \
                or "identify the key points explicitly stated" in prompt:
            task = prompt.rsplit("\n", 1)[-1]
            clauses = [c.strip() for c in task.replace(";", ".").split(".") if c.strip()]
            lines = [f"{i + 1}. {c}" for i, c in enumerate(clauses[:5])]
            return ChatTurn(text="Key Points:\n" + "\n".join(lines))
        if "**Available Tools:**" in prompt:
            # summary = truncated concatenation of the tool descriptions
            section = prompt.split("**Available Tools:**", 1)[1]
            section = section.split("Please return only", 1)[0].strip()
            return ChatTurn(text=section[: self.summary_limit])
        return ChatTurn(text=prompt[-200:])


# --- HTTP backend ----------------------------------------------------------

@dataclass
class HttpChatBackend:
    """Generic OpenAI-style chat-completions client.

    Credentials come from the environment variable named by ``api_key_env``,
    never from flags or files.
    """

    base_url: str
    model_id: str
    api_key_env: str = "TOOLGATE_API_KEY"
    timeout: float = 120.0
    price: dict | None = None
    extra_headers: dict = field(default_factory=dict)

    def complete(self, messages, temperature=0.7, tools=None) -> ChatTurn:
        import requests

        headers = {"Content-Type": "application/json", **self.extra_headers}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body: dict = {"model": self.model_id, "messages": _to_openai(messages),
                      "temperature": temperature}
        if tools:
            body["tools"] = [{"type": "function", "function": {
                "name": t["name"], "description": t.get("description", ""),
                "parameters": t.get("inputSchema", t.get("input_schema", {})),
            }} for t in tools]
        try:
            resp = requests.post(f"{self.base_url.rstrip('/')}/chat/completions",
                                 json=body, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
        except Exception as exc:  # noqa: BLE001 - surfaced uniformly
            raise BackendError(f"{self.model_id}: {exc}") from exc
        try:
            choice = data["choices"][0]["message"]
            usage = data.get("usage", {})
            turn = ChatTurn(
                text=choice.get("content"),
                prompt_tokens=usage.get("prompt_tokens", 0),
                completion_tokens=usage.get("completion_tokens", 0),
            )
            calls = choice.get("tool_calls") or []
            if calls:
                fn = calls[0]["function"]
                turn.tool_name = fn["name"]
                turn.tool_args = json.loads(fn.get("arguments") or "{}")
            return turn
        except (KeyError, IndexError, json.JSONDecodeError) as exc:
            raise BackendError(f"{self.model_id}: malformed completion: {exc}") from exc


def _to_openai(messages: list[dict]) -> list[dict]:
    out = []
    for m in messages:
        role = m.get("role", "user")
        if role == "tool":
            out.append({"role": "user", "content": f"[tool result]\n{m.get('content', '')}"})
        else:
            out.append({"role": role, "content": m.get("content", "") or ""})
    return out


def make_chat_backend(spec: str, task_id: str | None = None) -> ChatBackend:
    """Build a backend from a CLI spec string.

    Specs: "mock", "scripted:PATH", "http:BASE_URL,MODEL".
    """
    if spec == "mock":
        return DeterministicChatBackend()
    if spec.startswith("scripted:"):
        return ScriptedChatBackend.from_file(spec.split(":", 1)[1], task_id=task_id)
    if spec.startswith("http:"):
        rest = spec.split(":", 1)[1]
        try:
            base_url, model = rest.rsplit(",", 1)
        except ValueError:
            raise BackendError(f"bad http backend spec: {spec!r} "
                               "(expected http:BASE_URL,MODEL)")
        return HttpChatBackend(base_url=base_url, model_id=model)
    raise BackendError(f"unknown backend spec: {spec!r}")
