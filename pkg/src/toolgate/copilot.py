"""The gateway: an MCP server exposing exactly two meta-tools, route and
execute, proxying execution to lazily-launched downstream servers with a
bounded retry discipline, and recording every action.
"""

from __future__ import annotations

import json
import logging
import sys
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

from . import protocol, prompts, retrieval
from .backends import EmbeddingBackend
from .catalog import Catalog, ServerConfig
from .errors import (
    HandshakeTimeout,
    NotFound,
    QueryFormatError,
    SpawnError,
    ToolErrorResult,
    ToolNotFound,
    TransportError,
    TransportExhausted,
)

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 3
DEFAULT_MAX_LIVE_SERVERS = 16

ROUTE_TOOL = protocol.ToolDescriptor(
    name="route",
    description=prompts.ROUTE_TOOL_DESCRIPTION,
    input_schema={
        "type": "object",
        "properties": {"query": {"type": "string"}},
        "required": ["query"],
    },
)

EXECUTE_TOOL = protocol.ToolDescriptor(
    name="execute",
    description=prompts.EXECUTE_TOOL_DESCRIPTION,
    input_schema={
        "type": "object",
        "properties": {
            "server_name": {"type": "string"},
            "tool_name": {"type": "string"},
            "params": {"type": ["object", "null"]},
        },
        "required": ["server_name", "tool_name"],
    },
)


@dataclass(frozen=True)
class ExecuteRequest:
    server_name: str
    tool_name: str
    params: dict | None = None


@dataclass
class ToolCallRecord:
    seq: int
    action: str  # "route" | "execute"
    request: dict
    observation: str
    outcome: str  # ok | transport_error | tool_error | not_found | format_error
    attempts: int = 1
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "action": self.action,
            "request": self.request,
            "observation": self.observation,
            "outcome": self.outcome,
            "attempts": self.attempts,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ToolCallRecord":
        return cls(**data)


def edit_distance(a: str, b: str) -> int:
    """Plain Levenshtein distance, case-insensitive."""
    a, b = a.lower(), b.lower()
    if not a:
        return len(b)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def nearest_name(name: str, candidates: Sequence[str]) -> str | None:
    if not candidates:
        return None
    return min(sorted(candidates), key=lambda c: edit_distance(name, c))


class GatewaySession:
    """One agent session: a catalog snapshot, lazily-launched downstream
    handles with an LRU cap, and an append-only record of every meta-tool
    invocation.
    """

    def __init__(self, catalog: Catalog, fleet: Sequence[ServerConfig],
                 embedder: EmbeddingBackend,
                 k: int = retrieval.DEFAULT_K,
                 weights: tuple[float, float] = retrieval.DEFAULT_WEIGHTS,
                 max_live_servers: int = DEFAULT_MAX_LIVE_SERVERS,
                 handshake_timeout: float = protocol.DEFAULT_HANDSHAKE_TIMEOUT,
                 call_timeout: float = protocol.DEFAULT_CALL_TIMEOUT):
        self.catalog = catalog
        self.fleet = {c.server_name: c for c in fleet}
        self.embedder = embedder
        self.k = k
        self.weights = weights
        self.max_live_servers = max_live_servers
        self.handshake_timeout = handshake_timeout
        self.call_timeout = call_timeout
        self.records: list[ToolCallRecord] = []
        self._handles: OrderedDict[str, protocol.ServerHandle] = OrderedDict()
        self._record_lock = threading.Lock()

    # -- meta-tool surface --

    def meta_tools(self) -> list[protocol.ToolDescriptor]:
        return [ROUTE_TOOL, EXECUTE_TOOL]

    def call_meta(self, name: str, params: dict) -> str:
        """Dispatch one meta-tool invocation; always records exactly one
        ToolCallRecord and returns the observation text the agent sees.
        """
        if name == "route":
            return self.handle_route(params.get("query", ""))
        if name == "execute":
            req = ExecuteRequest(
                server_name=params.get("server_name", ""),
                tool_name=params.get("tool_name", ""),
                params=params.get("params"),
            )
            try:
                return self.handle_execute(req)
            except NotFound as exc:
                return str(exc)
            except TransportExhausted as exc:
                return f"Tool execution failed after {exc.attempts} attempts: {exc}"
        raise ToolNotFound(f"unknown meta-tool: {name}")

    def handle_route(self, raw_query: str) -> str:
        started = time.perf_counter()
        try:
            query = retrieval.parse_route_query(raw_query)
        except QueryFormatError as exc:
            observation = (
                f"Invalid route query (missing {exc.missing}). The query must "
                "contain a <tool_assistant> block with 'server:' and 'tool:' lines.")
            self._record("route", {"query": raw_query}, observation,
                         "format_error", 1, started)
            return observation
        candidates = retrieval.route(self.catalog, query, self.embedder,
                                     k=self.k, weights=self.weights)
        observation = retrieval.render_route_result(candidates, self.catalog)
        self._record("route", {"query": raw_query}, observation, "ok", 1, started)
        return observation

    def handle_execute(self, req: ExecuteRequest) -> str:
        """Validate, lazily launch, invoke with the retry discipline.

        Transport failures are retried up to MAX_ATTEMPTS total attempts;
        semantic tool errors are returned immediately as observations.
        """
        started = time.perf_counter()
        request_dict = {"server_name": req.server_name, "tool_name": req.tool_name,
                        "params": req.params}

        if req.server_name not in self.catalog.summaries:
            hint = nearest_name(req.server_name, list(self.catalog.summaries))
            message = f"Unknown server {req.server_name!r}."
            if hint:
                message += f" Did you mean {hint!r}?"
            self._record("execute", request_dict, message, "not_found", 1, started)
            raise NotFound(message, hint=hint)
        if self.catalog.tool(req.server_name, req.tool_name) is None:
            names = [t.tool_name for t in self.catalog.tools
                     if t.server_name == req.server_name]
            hint = nearest_name(req.tool_name, names)
            message = f"Unknown tool {req.tool_name!r} on server {req.server_name!r}."
            if hint:
                message += f" Did you mean {hint!r}?"
            self._record("execute", request_dict, message, "not_found", 1, started)
            raise NotFound(message, hint=hint)

        attempts = 0
        last_error: Exception | None = None
        while attempts < MAX_ATTEMPTS:
            attempts += 1
            try:
                handle = self._handle_for(req.server_name)
            except (TransportError, SpawnError, HandshakeTimeout) as exc:
                last_error = exc
                continue
            try:
                result = protocol.call_tool(handle, req.tool_name, req.params or {})
            except ToolErrorResult as exc:
                observation = f"Tool error: {exc}"
                self._record("execute", request_dict, observation, "tool_error",
                             attempts, started)
                return observation
            except TransportError as exc:
                last_error = exc
                # keep a live handle (call merely timed out); drop dead ones
                if not handle.alive:
                    self._drop_handle(req.server_name)
                continue
            observation = result.text
            self._record("execute", request_dict, observation, "ok", attempts, started)
            return observation
        observation = f"Transport failure after {attempts} attempts: {last_error}"
        self._record("execute", request_dict, observation, "transport_error",
                     attempts, started)
        raise TransportExhausted(str(last_error), attempts=attempts)

    # -- downstream handle management --

    def _handle_for(self, server_name: str) -> protocol.ServerHandle:
        handle = self._handles.get(server_name)
        if handle is not None and handle.state == "ready" and handle.alive:
            self._handles.move_to_end(server_name)
            return handle
        if handle is not None:
            self._drop_handle(server_name)
        config = self.fleet.get(server_name)
        if config is None:
            raise TransportError(f"no fleet config for server {server_name!r}")
        handle = protocol.launch_server(config, handshake_timeout=self.handshake_timeout,
                                        call_timeout=self.call_timeout)
        self._handles[server_name] = handle
        while len(self._handles) > self.max_live_servers:
            evicted_name, evicted = self._handles.popitem(last=False)
            logger.debug("evicting idle server %s", evicted_name)
            evicted.stop()
        return handle

    def _drop_handle(self, server_name: str) -> None:
        handle = self._handles.pop(server_name, None)
        if handle is not None:
            handle.stop()

    def _record(self, action: str, request: dict, observation: str,
                outcome: str, attempts: int, started: float) -> None:
        with self._record_lock:
            self.records.append(ToolCallRecord(
                seq=len(self.records) + 1,
                action=action,
                request=request,
                observation=observation,
                outcome=outcome,
                attempts=attempts,
                wall_time=time.perf_counter() - started,
            ))

    def close(self) -> None:
        for handle in list(self._handles.values()):
            handle.stop()
        self._handles.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve_stdio(session: GatewaySession, stdin=None, stdout=None) -> None:
    """Serve the gateway as an MCP server over stdio (initialize,
    tools/list, tools/call). Blocks until stdin closes.
    """
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout

    def send(obj: dict) -> None:
        stdout.write(json.dumps(obj, ensure_ascii=False) + "\n")
        stdout.flush()

    for event in protocol.frame_and_parse(stdin):
        if isinstance(event, Exception):
            logger.warning("gateway: unparseable line: %r", event)
            continue
        if event.kind == "notification":
            continue
        if event.kind != "request":
            logger.warning("gateway: ignoring %s", event.kind)
            continue
        if event.method == "initialize":
            send({"jsonrpc": "2.0", "id": event.id, "result": {
                "protocolVersion": protocol.PROTOCOL_VERSION,
                "capabilities": {"tools": {}},
                "serverInfo": {"name": "toolgate-gateway", "version": "0.1.0"},
            }})
        elif event.method == "tools/list":
            send({"jsonrpc": "2.0", "id": event.id, "result": {
                "tools": [t.to_dict() for t in session.meta_tools()],
            }})
        elif event.method == "tools/call":
            params = event.payload or {}
            name = params.get("name")
            args = params.get("arguments", {}) or {}
            try:
                observation = session.call_meta(name, args)
            except ToolNotFound as exc:
                send({"jsonrpc": "2.0", "id": event.id,
                      "error": {"code": -32602, "message": f"Unknown tool: {name}"}})
                continue
            except Exception as exc:  # downstream crash must not kill the gateway
                logger.exception("gateway: %s failed", name)
                observation = f"Gateway error: {exc}"
            send({"jsonrpc": "2.0", "id": event.id, "result": {
                "content": [{"type": "text", "text": observation}],
                "isError": False,
            }})
        else:
            send({"jsonrpc": "2.0", "id": event.id,
                  "error": {"code": -32601, "message": f"Method not found: {event.method}"}})
