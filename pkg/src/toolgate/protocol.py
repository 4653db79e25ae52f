"""Minimal MCP client core: message model, newline-delimited JSON-RPC framing,
handshake, and supervised lifecycle of downstream server processes.

Wire format: JSON-RPC 2.0 objects, one per line, UTF-8, no embedded newlines.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

from .errors import (
    HandshakeTimeout,
    ParseError,
    SpawnError,
    ToolErrorResult,
    ToolNotFound,
    TransportError,
)

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = "2025-03-26"
DEFAULT_HANDSHAKE_TIMEOUT = 30.0
DEFAULT_CALL_TIMEOUT = 60.0

KINDS = ("request", "response", "error", "notification")


@dataclass(frozen=True)
class RpcMessage:
    """One JSON-RPC message, classified by kind.

    Requests and notifications carry ``method``; responses and errors carry
    the correlated ``id``. ``payload`` holds params / result / error object.
    """

    kind: str
    id: int | str | None = None
    method: str | None = None
    payload: Any = None


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    description: str
    input_schema: dict

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "inputSchema": self.input_schema,
        }


def serialize(msg: RpcMessage) -> str:
    """Render a message as one JSON-RPC line (no trailing newline)."""
    obj: dict[str, Any] = {"jsonrpc": "2.0"}
    if msg.kind == "request":
        obj["id"] = msg.id
        obj["method"] = msg.method
        if msg.payload is not None:
            obj["params"] = msg.payload
    elif msg.kind == "notification":
        obj["method"] = msg.method
        if msg.payload is not None:
            obj["params"] = msg.payload
    elif msg.kind == "response":
        obj["id"] = msg.id
        obj["result"] = msg.payload
    elif msg.kind == "error":
        obj["id"] = msg.id
        obj["error"] = msg.payload
    else:
        raise ValueError(f"unknown message kind: {msg.kind}")
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def parse_line(line: str) -> RpcMessage:
    """Parse one wire line into a message; raises ParseError on junk."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        raise ParseError("invalid JSON", line)
    if not isinstance(obj, dict):
        raise ParseError("not an object", line)
    if obj.get("jsonrpc") != "2.0":
        raise ParseError("missing jsonrpc version", line)
    msg_id = obj.get("id")
    if msg_id is not None and not isinstance(msg_id, (int, str)):
        raise ParseError("id must be integer or string", line)
    if "method" in obj:
        if not isinstance(obj["method"], str) or not obj["method"]:
            raise ParseError("method must be a non-empty string", line)
        kind = "request" if "id" in obj and msg_id is not None else "notification"
        return RpcMessage(kind=kind, id=msg_id, method=obj["method"], payload=obj.get("params"))
    if "result" in obj:
        if "id" not in obj:
            raise ParseError("response without id", line)
        return RpcMessage(kind="response", id=msg_id, payload=obj["result"])
    if "error" in obj:
        if "id" not in obj:
            raise ParseError("error without id", line)
        err = obj["error"]
        if not isinstance(err, dict) or "code" not in err or "message" not in err:
            raise ParseError("malformed error object", line)
        return RpcMessage(kind="error", id=msg_id, payload=err)
    raise ParseError("no method, result, or error", line)


def frame_and_parse(stream: Iterable[str]) -> Iterator[RpcMessage | ParseError]:
    """Yield each newline-delimited message from ``stream`` in order.

    Malformed lines are yielded as ParseError events, never silently dropped.
    Blank lines are skipped.
    """
    for line in stream:
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        try:
            yield parse_line(line)
        except ParseError as exc:
            yield exc


# --- child process client -------------------------------------------------

_STATES = ("launching", "ready", "failed", "stopped")


@dataclass
class ToolResult:
    """Successful tools/call result: joined text content."""

    text: str
    raw: dict = field(default_factory=dict)


class ServerHandle:
    """A supervised child MCP server over stdio.

    One serialized writer per handle; concurrent callers are matched to
    responses by correlation id. Tools may only be listed/called in state
    "ready"; a failed handle never returns to ready without a relaunch.
    """

    def __init__(self, server_name: str, proc: subprocess.Popen,
                 call_timeout: float = DEFAULT_CALL_TIMEOUT):
        self.server_name = server_name
        self.state = "launching"
        self.call_timeout = call_timeout
        self._proc = proc
        self._write_lock = threading.Lock()
        self._pending_lock = threading.Lock()
        self._pending: dict[int | str, queue.Queue] = {}
        self._next_id = 0
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    # -- internals --

    def _read_loop(self) -> None:
        stdout = self._proc.stdout
        assert stdout is not None
        for event in frame_and_parse(stdout):
            if isinstance(event, ParseError):
                logger.warning("[%s] unparseable line: %r", self.server_name, event.line)
                continue
            if event.kind in ("response", "error"):
                with self._pending_lock:
                    waiter = self._pending.pop(event.id, None)
                if waiter is None:
                    logger.warning("[%s] orphan response id=%r discarded",
                                   self.server_name, event.id)
                    continue
                waiter.put(event)
            else:
                logger.debug("[%s] ignoring server-initiated %s %r",
                             self.server_name, event.kind, event.method)
        # EOF: fail everything still waiting
        with self._pending_lock:
            pending, self._pending = self._pending, {}
        for waiter in pending.values():
            waiter.put(TransportError(f"{self.server_name}: stream closed"))

    def _write(self, msg: RpcMessage) -> None:
        line = serialize(msg) + "\n"
        with self._write_lock:
            try:
                stdin = self._proc.stdin
                assert stdin is not None
                stdin.write(line)
                stdin.flush()
            except (BrokenPipeError, OSError, ValueError) as exc:
                raise TransportError(f"{self.server_name}: write failed: {exc}") from exc

    def request(self, method: str, params: Any = None,
                timeout: float | None = None) -> RpcMessage:
        """Issue a request and wait for its correlated response or error."""
        if timeout is None:
            timeout = self.call_timeout
        with self._pending_lock:
            self._next_id += 1
            msg_id = self._next_id
            waiter: queue.Queue = queue.Queue(maxsize=1)
            self._pending[msg_id] = waiter
        try:
            self._write(RpcMessage(kind="request", id=msg_id, method=method, payload=params))
        except TransportError:
            with self._pending_lock:
                self._pending.pop(msg_id, None)
            raise
        try:
            got = waiter.get(timeout=timeout)
        except queue.Empty:
            with self._pending_lock:
                self._pending.pop(msg_id, None)
            raise TransportError(
                f"{self.server_name}: no response to {method} within {timeout}s")
        if isinstance(got, TransportError):
            raise got
        return got

    def notify(self, method: str, params: Any = None) -> None:
        self._write(RpcMessage(kind="notification", method=method, payload=params))

    # -- lifecycle --

    @property
    def alive(self) -> bool:
        return self._proc.poll() is None

    def stop(self) -> None:
        if self.state == "stopped":
            return
        self.state = "stopped"
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
        except OSError:
            pass
        self._proc.terminate()
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


def launch_server(config, handshake_timeout: float = DEFAULT_HANDSHAKE_TIMEOUT,
                  call_timeout: float = DEFAULT_CALL_TIMEOUT) -> ServerHandle:
    """Spawn the configured server, complete the initialize handshake,
    and return a ready handle.

    ``config`` needs ``server_name``, ``command``, ``args``, ``env`` attributes
    (see catalog.ServerConfig).
    """
    env = dict(os.environ)
    env.update(config.env or {})
    try:
        proc = subprocess.Popen(
            [config.command, *config.args],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            env=env,
            text=True,
            bufsize=1,
        )
    except (FileNotFoundError, PermissionError, OSError) as exc:
        raise SpawnError(f"{config.server_name}: cannot spawn {config.command!r}: {exc}") from exc

    handle = ServerHandle(config.server_name, proc, call_timeout=call_timeout)
    try:
        handle.request(
            "initialize",
            {
                "protocolVersion": PROTOCOL_VERSION,
                "capabilities": {},
                "clientInfo": {"name": "toolgate", "version": "0.1.0"},
            },
            timeout=handshake_timeout,
        )
        handle.notify("notifications/initialized")
    except TransportError as exc:
        handle.state = "failed"
        handle.stop()
        handle.state = "failed"
        raise HandshakeTimeout(f"{config.server_name}: {exc}") from exc
    handle.state = "ready"
    return handle


def list_tools(handle: ServerHandle) -> list[ToolDescriptor]:
    """Return the server's advertised tools. Idempotent."""
    if handle.state != "ready":
        raise TransportError(f"{handle.server_name}: handle not ready ({handle.state})")
    resp = handle.request("tools/list", {})
    if resp.kind == "error":
        raise TransportError(f"{handle.server_name}: tools/list failed: {resp.payload}")
    tools = resp.payload.get("tools", [])
    return [
        ToolDescriptor(
            name=t["name"],
            description=t.get("description", ""),
            input_schema=t.get("inputSchema", {}),
        )
        for t in tools
    ]


def call_tool(handle: ServerHandle, tool: str, params: dict | None = None,
              timeout: float | None = None) -> ToolResult:
    """Invoke a tool and return its text content.

    Raises ToolNotFound for unknown tool names, ToolErrorResult when the
    server executed the tool but reported a semantic error, TransportError
    for stream/process death or timeout.
    """
    if handle.state != "ready":
        raise TransportError(f"{handle.server_name}: handle not ready ({handle.state})")
    resp = handle.request("tools/call", {"name": tool, "arguments": params or {}},
                          timeout=timeout)
    if resp.kind == "error":
        message = resp.payload.get("message", "")
        if "unknown tool" in message.lower():
            raise ToolNotFound(f"{handle.server_name}: {message}")
        raise TransportError(f"{handle.server_name}: rpc error: {message}")
    result = resp.payload or {}
    parts = [c.get("text", "") for c in result.get("content", []) if c.get("type") == "text"]
    text = "\n".join(parts)
    if result.get("isError"):
        raise ToolErrorResult(text or f"{handle.server_name}/{tool}: tool error")
    return ToolResult(text=text, raw=result)
