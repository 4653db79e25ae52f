"""Deterministic mock MCP server driven by a behavior declaration file.

Runs as ``python -m toolgate.mockserver behavior.json`` and speaks
newline-delimited JSON-RPC over stdio. Behavior is fully determined by the
declaration: fixed or builtin tool outputs, per-tool transport-failure
counts (the server stays silent for that request), per-tool semantic
errors, an optional whole-server stall flag, and an optional latency.

Behavior file schema (version 1):

    {
      "version": 1,
      "name": "arithmetic",
      "description": "Basic integer arithmetic.",
      "stall": false,
      "latency": 0.0,
      "tools": [
        {"name": "add", "description": "...", "input_schema": {...},
         "builtin": "add"},
        {"name": "motd", "description": "...", "output": "hello"},
        {"name": "broken", "description": "...", "error": "boom",
         "fail_count": 2}
      ]
    }

``fail_count`` transport failures are consumed before the declared output
(or semantic ``error``) is served.
"""

from __future__ import annotations

import json
import sys
import time


def load_behavior(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        behavior = json.load(fh)
    if behavior.get("version") != 1:
        raise ValueError(f"unsupported behavior version: {behavior.get('version')}")
    for tool in behavior.get("tools", []):
        if "name" not in tool:
            raise ValueError("tool without name")
        if not any(k in tool for k in ("output", "builtin", "error")):
            raise ValueError(f"tool {tool['name']}: no output, builtin, or error")
    return behavior


def _builtin_result(kind: str, args: dict) -> str:
    if kind == "add":
        return str(args["a"] + args["b"])
    if kind == "multiply":
        return str(args["a"] * args["b"])
    if kind == "echo":
        return str(args.get("text", ""))
    raise ValueError(f"unknown builtin: {kind}")


class MockServer:
    def __init__(self, behavior: dict, stdin=None, stdout=None):
        self.behavior = behavior
        self.stdin = stdin or sys.stdin
        self.stdout = stdout or sys.stdout
        self.fail_remaining = {
            t["name"]: int(t.get("fail_count", 0)) for t in behavior.get("tools", [])
        }

    def _send(self, obj: dict) -> None:
        self.stdout.write(json.dumps(obj, ensure_ascii=False) + "\n")
        self.stdout.flush()

    def _result(self, msg_id, result: dict) -> None:
        self._send({"jsonrpc": "2.0", "id": msg_id, "result": result})

    def _error(self, msg_id, code: int, message: str) -> None:
        self._send({"jsonrpc": "2.0", "id": msg_id, "error": {"code": code, "message": message}})

    def handle(self, msg: dict) -> None:
        method = msg.get("method")
        msg_id = msg.get("id")
        if method is None or msg_id is None:
            return  # notification or response: nothing to do
        latency = float(self.behavior.get("latency", 0.0))
        if latency:
            time.sleep(latency)
        if method == "initialize":
            self._result(msg_id, {
                "protocolVersion": msg.get("params", {}).get("protocolVersion", ""),
                "capabilities": {"tools": {}},
                "serverInfo": {"name": self.behavior.get("name", "mock"), "version": "1.0"},
            })
        elif method == "tools/list":
            self._result(msg_id, {"tools": [
                {
                    "name": t["name"],
                    "description": t.get("description", ""),
                    "inputSchema": t.get("input_schema", {"type": "object", "properties": {}}),
                }
                for t in self.behavior.get("tools", [])
            ]})
        elif method == "tools/call":
            params = msg.get("params", {})
            name = params.get("name")
            args = params.get("arguments", {}) or {}
            tool = next((t for t in self.behavior.get("tools", []) if t["name"] == name), None)
            if tool is None:
                self._error(msg_id, -32602, f"Unknown tool: {name}")
                return
            if self.fail_remaining.get(name, 0) > 0:
                self.fail_remaining[name] -= 1
                return  # simulated transport failure: stay silent
            if "error" in tool:
                self._result(msg_id, {
                    "content": [{"type": "text", "text": tool["error"]}],
                    "isError": True,
                })
                return
            if "builtin" in tool:
                try:
                    text = _builtin_result(tool["builtin"], args)
                except (KeyError, TypeError) as exc:
                    self._result(msg_id, {
                        "content": [{"type": "text", "text": f"bad parameters: {exc}"}],
                        "isError": True,
                    })
                    return
            else:
                text = str(tool["output"])
            self._result(msg_id, {"content": [{"type": "text", "text": text}], "isError": False})
        else:
            self._error(msg_id, -32601, f"Method not found: {method}")

    def run(self) -> None:
        if self.behavior.get("stall"):
            # Consume input forever, never answer (handshake timeout upstream).
            for _ in self.stdin:
                pass
            return
        for line in self.stdin:
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError:
                continue
            self.handle(msg)


def main(argv: list[str] | None = None) -> int:
    argv = argv if argv is not None else sys.argv[1:]
    if len(argv) != 1:
        print("usage: python -m toolgate.mockserver BEHAVIOR.json", file=sys.stderr)
        return 2
    try:
        behavior = load_behavior(argv[0])
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"bad behavior file: {exc}", file=sys.stderr)
        return 2
    MockServer(behavior).run()
    return 0


if __name__ == "__main__":
    sys.exit(main())
