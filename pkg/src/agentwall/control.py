"""Loopback HTTP surface for the dashboard, CLI, and scripts.

Endpoints (all JSON, all bearer-token authenticated):

    GET  /v1/health
    GET  /v1/approvals/pending
    POST /v1/approvals/{id}/decision      {"decision": "approve"|"reject"}
    GET  /v1/sessions
    GET  /v1/sessions/{id}/events
    GET  /v1/events/stream                server-sent events, one frame per line
    GET  /v1/policy

The server binds loopback only. The token lives in a 0600 file under the
AgentWall home; it exists to stop other local unprivileged processes
from approving actions, not to provide remote security (there is no
remote access). EventSource cannot set headers, so for the stream (and
any GET) the token may alternatively arrive as an ``access_token`` query
parameter. Static dashboard assets, when built, are served under /ui/.

No endpoint mutates policy; approval decisions are the only writes.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any
from urllib.parse import parse_qs, urlparse

from .approvals import ApprovalBroker, ApprovalConflictError, DecisionChannel, UnknownApprovalError
from .audit import iter_event_dicts, list_session_files, verify_chain
from .events import EventBus
from .policy import PolicyEngine

_UI_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
}


class ControlServer:
    def __init__(
        self,
        *,
        broker: ApprovalBroker,
        bus: EventBus,
        engine: PolicyEngine,
        sessions_dir: Path,
        token: str,
        host: str = "127.0.0.1",
        port: int = 48620,
        ui_dir: Path | None = None,
        clock=None,
    ):
        import time as _time

        self.broker = broker
        self.bus = bus
        self.engine = engine
        self.sessions_dir = Path(sessions_dir)
        self.token = token
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.clock = clock or _time.time

        control = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):  # quiet by default
                pass

            def _authorized(self) -> bool:
                header = self.headers.get("Authorization", "")
                if header == f"Bearer {control.token}":
                    return True
                query = parse_qs(urlparse(self.path).query)
                return query.get("access_token", [""])[0] == control.token

            def _send_json(self, status: int, payload: Any) -> None:
                body = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def _reject(self) -> None:
                self._send_json(401, {"error": "missing or invalid bearer token"})

            def do_GET(self):
                path = urlparse(self.path).path
                if path == "/" or path.startswith("/ui"):
                    control._serve_ui(self, path)
                    return
                if not self._authorized():
                    self._reject()
                    return
                if path == "/v1/health":
                    self._send_json(200, control._health())
                elif path == "/v1/approvals/pending":
                    now = control.clock()
                    self._send_json(
                        200, {"pending": [r.to_dict(now) for r in control.broker.pending()]}
                    )
                elif path == "/v1/sessions":
                    self._send_json(200, control._sessions())
                elif path.startswith("/v1/sessions/") and path.endswith("/events"):
                    session_id = path[len("/v1/sessions/"):-len("/events")]
                    self._send_json(200, control._session_events(session_id))
                elif path == "/v1/policy":
                    self._send_json(200, control._policy())
                elif path == "/v1/events/stream":
                    control._serve_stream(self)
                else:
                    self._send_json(404, {"error": f"no such endpoint {path}"})

            def do_POST(self):
                path = urlparse(self.path).path
                if not self._authorized():
                    self._reject()
                    return
                parts = path.strip("/").split("/")
                if len(parts) == 4 and parts[:2] == ["v1", "approvals"] and parts[3] == "decision":
                    length = int(self.headers.get("Content-Length", 0))
                    try:
                        body = json.loads(self.rfile.read(length) or b"{}")
                    except json.JSONDecodeError:
                        self._send_json(400, {"error": "body must be JSON"})
                        return
                    control._decide(self, parts[2], body)
                else:
                    self._send_json(404, {"error": f"no such endpoint {path}"})

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True,
                                        name="agentwall-control")
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    # -- endpoint bodies --------------------------------------------------

    def _health(self) -> dict:
        return {
            "status": "ok",
            "policy_version": self.engine.document.content_hash,
            "pending_approvals": len(self.broker.pending()),
        }

    def _policy(self) -> dict:
        doc = self.engine.document
        return {
            "version": doc.version,
            "content_hash": doc.content_hash,
            "defaults": {
                "decision": doc.defaults.decision.value,
                "approval_timeout_seconds": doc.defaults.approval_timeout_seconds,
            },
            "rules": [
                {
                    "id": r.id,
                    "action": r.action.value,
                    "decision": r.decision.value,
                    "path_pattern": list(r.path_pattern) if r.path_pattern else None,
                    "command_pattern": list(r.command_pattern) if r.command_pattern else None,
                    "contains": [list(g) for g in r.contains] if r.contains else None,
                    "sql_verbs": sorted(r.sql_verbs) if r.sql_verbs else None,
                    "destination_pattern": (
                        list(r.destination_pattern) if r.destination_pattern else None
                    ),
                    "exact_path": r.exact_path,
                }
                for r in doc.rules
            ],
            "rate_limits": [
                {"tool": l.tool, "max_calls": l.max_calls, "window_seconds": l.window_seconds}
                for l in doc.rate_limits
            ],
        }

    def _sessions(self) -> dict:
        sessions: dict[str, dict] = {}
        for path in list_session_files(self.sessions_dir):
            for event in iter_event_dicts(path):
                entry = sessions.setdefault(
                    event["session_id"],
                    {"session_id": event["session_id"], "file": path.name, "events": 0,
                     "first_ts": event["ts"], "last_ts": event["ts"], "runtime": event["runtime"]},
                )
                entry["events"] += 1
                entry["last_ts"] = event["ts"]
        ordered = sorted(sessions.values(), key=lambda s: s["first_ts"])
        return {"sessions": ordered}

    def _session_events(self, session_id: str) -> dict:
        events: list[dict] = []
        chain_ok = True
        corrupt_seq: int | None = None
        for path in list_session_files(self.sessions_dir):
            file_events = [e for e in iter_event_dicts(path) if e["session_id"] == session_id]
            if file_events:
                corrupt = verify_chain(path)
                if corrupt is not None:
                    chain_ok = False
                    corrupt_seq = corrupt
                events.extend(file_events)
        return {
            "session_id": session_id,
            "chain_ok": chain_ok,
            "corrupt_seq": corrupt_seq,
            "events": events,
        }

    def _decide(self, handler, request_id: str, body: dict) -> None:
        decision = str(body.get("decision", "")).lower()
        if decision not in ("approve", "reject"):
            handler._send_json(400, {"error": "decision must be 'approve' or 'reject'"})
            return
        try:
            resolved = self.broker.decide(
                request_id, approve=decision == "approve", via=DecisionChannel.API
            )
        except UnknownApprovalError:
            handler._send_json(404, {"error": f"no approval request {request_id}"})
            return
        except ApprovalConflictError as exc:
            handler._send_json(
                409, {"error": str(exc), "state": exc.state.value, "id": request_id}
            )
            return
        handler._send_json(200, resolved.to_dict(self.clock()))

    def _serve_stream(self, handler) -> None:
        subscription = self.bus.subscribe()
        try:
            handler.send_response(200)
            handler.send_header("Content-Type", "text/event-stream")
            handler.send_header("Cache-Control", "no-cache")
            handler.send_header("Connection", "close")
            handler.end_headers()
            while subscription.alive:
                frame = subscription.get(timeout=1.0)
                if frame is None:
                    handler.wfile.write(b": keepalive\n\n")
                    handler.wfile.flush()
                    continue
                data = f"data: {frame.to_json()}\n\n".encode("utf-8")
                handler.wfile.write(data)
                handler.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.bus.unsubscribe(subscription)

    def _serve_ui(self, handler, path: str) -> None:
        if self.ui_dir is None or not self.ui_dir.is_dir():
            handler._send_json(404, {"error": "dashboard assets not built"})
            return
        relative = path[len("/ui"):].lstrip("/") if path.startswith("/ui") else ""
        if not relative:
            relative = "index.html"
        target = (self.ui_dir / relative).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            handler._send_json(404, {"error": "not found"})
            return
        body = target.read_bytes()
        handler.send_response(200)
        handler.send_header(
            "Content-Type", _UI_TYPES.get(target.suffix, "application/octet-stream")
        )
        handler.send_header("Content-Length", str(len(body)))
        handler.end_headers()
        handler.wfile.write(body)
