"""Mock downstream MCP tool server for benchmarks and tests.

Speaks newline-delimited JSON-RPC on stdio, acknowledges every
``tools/call`` without touching the filesystem, and (when
``AGENTWALL_MOCK_LOG`` points at a file) records each call it receives
as one JSON line, so a test can diff what actually reached the
downstream against the proxy's audit log.

Special tool name ``__exit`` makes the server quit without responding,
simulating a downstream crash mid-request.
"""

from __future__ import annotations

import json
import os
import sys

_TOOLS = [
    {"name": name, "description": f"mock {name}", "inputSchema": {"type": "object"}}
    for name in (
        "read_file", "write_file", "edit_file", "delete_file",
        "exec", "run_command", "bash", "query", "sql", "fetch", "http_request",
    )
]


def _record(entry: dict) -> None:
    path = os.environ.get("AGENTWALL_MOCK_LOG")
    if not path:
        return
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(entry, sort_keys=True) + "\n")
        handle.flush()


def _reply(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload) + "\n")
    sys.stdout.flush()


def handle_message(message: dict) -> bool:
    """Process one request; returns False when the server should exit."""
    method = message.get("method")
    msg_id = message.get("id")
    if method == "tools/call":
        params = message.get("params") or {}
        tool = params.get("name", "")
        if tool == "__exit":
            return False
        _record({"tool": tool, "arguments": params.get("arguments") or {}, "id": msg_id})
        if msg_id is not None:
            _reply({
                "jsonrpc": "2.0",
                "id": msg_id,
                "result": {"content": [{"type": "text", "text": f"ok:{tool}"}], "isError": False},
            })
        return True
    if msg_id is None:
        return True  # notifications are fire-and-forget
    if method == "initialize":
        result = {
            "protocolVersion": (message.get("params") or {}).get("protocolVersion", "2025-03-26"),
            "capabilities": {"tools": {}},
            "serverInfo": {"name": "agentwall-mock-server", "version": "0.1.0"},
        }
    elif method == "tools/list":
        result = {"tools": _TOOLS}
    elif method == "ping":
        result = {}
    else:
        _reply({
            "jsonrpc": "2.0",
            "id": msg_id,
            "error": {"code": -32601, "message": f"method not found: {method}"},
        })
        return True
    _reply({"jsonrpc": "2.0", "id": msg_id, "result": result})
    return True


def main() -> int:
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
        except json.JSONDecodeError:
            continue
        if not handle_message(message):
            return 0
    return 0


if __name__ == "__main__":
    sys.exit(main())
