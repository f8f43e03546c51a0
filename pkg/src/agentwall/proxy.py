"""Stdio JSON-RPC man-in-the-middle between an AI client and a tool server.

The proxy spawns the downstream MCP server as a child process and relays
newline-delimited JSON-RPC in both directions. Everything except
``tools/call`` passes through untouched (ids, params, and results
preserved); every ``tools/call`` runs the decision pipeline first and is
forwarded only on ALLOW or an approved ASK. Denials come back to the
client as successful JSON-RPC responses carrying a tool-level error flag
and an explanatory message, because agent clients treat tool errors as
model-visible feedback while transport errors tend to abort sessions.

Each tools/call is handled on its own thread, so one request blocked on
a human approval never stalls the rest of the session. Shared state
(rate windows, the approval registry, the audit writer) is serialized
inside the respective components.
"""

from __future__ import annotations

import json
import os
import secrets
import subprocess
import sys
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .actions import SessionContext, normalize_path
from .approvals import ApprovalBroker, ApprovalConflictError, DecisionChannel
from .audit import AuditWriter, SessionLogError
from .control import ControlServer
from .defaults import DEFAULT_CONTROL_PORT, ensure_token
from .events import EventBus
from .pipeline import DecisionPipeline
from .policy import PolicyEngine, PolicyError
from .ratelimit import RateLimiter

_SWEEP_INTERVAL_SECONDS = 0.5


@dataclass
class ProxySession:
    session_id: str
    downstream_command: list[str]
    started_at: float
    client_name: str = "unknown"
    client_version: str = ""


def tool_error_response(msg_id, text: str) -> dict:
    return {
        "jsonrpc": "2.0",
        "id": msg_id,
        "result": {"content": [{"type": "text", "text": text}], "isError": True},
    }


class _LockedWriter:
    """Serialized line writer over a text stream."""

    def __init__(self, stream):
        self._stream = stream
        self._lock = threading.Lock()

    def send_raw(self, line: str) -> bool:
        try:
            with self._lock:
                self._stream.write(line if line.endswith("\n") else line + "\n")
                self._stream.flush()
            return True
        except (BrokenPipeError, ValueError, OSError):
            return False

    def send(self, message: dict) -> bool:
        return self.send_raw(json.dumps(message))


class MCPProxy:
    def __init__(
        self,
        downstream_command: list[str],
        *,
        policy_path: Path,
        workspace: str | None = None,
        session_dir: Path,
        agentwall_home: Path,
        control_port: int | None = DEFAULT_CONTROL_PORT,
        ui_dir: Path | None = None,
        stdin=None,
        stdout=None,
        clock=time.time,
        home: str | None = None,
        enable_tty_prompt: bool | None = None,
    ):
        self.downstream_command = list(downstream_command)
        self.stdin = stdin if stdin is not None else sys.stdin
        self.stdout_writer = _LockedWriter(stdout if stdout is not None else sys.stdout)
        self.clock = clock
        self.agentwall_home = Path(agentwall_home)
        self.control_port = control_port
        self.ui_dir = ui_dir
        home = home if home is not None else str(Path.home())
        workspace_raw = workspace if workspace else os.getcwd()
        self.workspace = normalize_path(workspace_raw, home, os.getcwd())

        self.engine = PolicyEngine(Path(policy_path), home=home)  # fail fast on a bad policy
        self.session = ProxySession(
            session_id=secrets.token_hex(4),
            downstream_command=self.downstream_command,
            started_at=clock(),
        )
        self.bus = EventBus()
        self.broker = ApprovalBroker(clock=clock)
        self.limiter = RateLimiter(self.engine.document.rate_limits)
        self.audit = AuditWriter(
            Path(session_dir),
            self.session.session_id,
            runtime=self.session.client_name,
            clock=clock,
        )
        self.pipeline = DecisionPipeline(
            engine=self.engine,
            limiter=self.limiter,
            broker=self.broker,
            audit=self.audit,
            context=SessionContext(
                session_id=self.session.session_id,
                runtime=self.session.client_name,
                workspace_root=self.workspace,
                home=home,
            ),
            bus=self.bus,
            clock=clock,
        )
        self._home = home
        self._downstream: subprocess.Popen | None = None
        self._downstream_writer: _LockedWriter | None = None
        self._inflight: dict[str, object] = {}
        self._inflight_lock = threading.Lock()
        self._shutdown = threading.Event()
        self._client_closed = False
        self._downstream_crashed = False
        self._control: ControlServer | None = None
        if enable_tty_prompt is None:
            enable_tty_prompt = os.environ.get("AGENTWALL_NO_TTY", "") != "1"
        self._enable_tty_prompt = enable_tty_prompt

    # -- lifecycle --------------------------------------------------------

    def run(self) -> int:
        try:
            self._downstream = subprocess.Popen(
                self.downstream_command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
                encoding="utf-8",
            )
        except OSError as exc:
            print(f"agentwall: cannot start downstream server: {exc}", file=sys.stderr)
            return 1
        self._downstream_writer = _LockedWriter(self._downstream.stdin)

        if self.control_port is not None:
            token = ensure_token(self.agentwall_home / "control.token")
            try:
                self._control = ControlServer(
                    broker=self.broker,
                    bus=self.bus,
                    engine=self.engine,
                    sessions_dir=self.audit.directory,
                    token=token,
                    port=self.control_port,
                    ui_dir=self.ui_dir,
                    clock=self.clock,
                )
            except OSError as exc:
                print(
                    f"agentwall: cannot bind control API port {self.control_port}: {exc}",
                    file=sys.stderr,
                )
                self._teardown()
                return 1
            self._control.start()
            port_file = self.agentwall_home / "control.port"
            port_file.parent.mkdir(parents=True, exist_ok=True)
            port_file.write_text(str(self._control.port) + "\n", encoding="utf-8")
            print(
                f"agentwall: control API on 127.0.0.1:{self._control.port} "
                f"(dashboard: http://127.0.0.1:{self._control.port}/ui/?token={token})",
                file=sys.stderr,
            )

        threads = [
            threading.Thread(target=self._pump_client, daemon=True, name="client-reader"),
            threading.Thread(target=self._pump_downstream, daemon=True, name="downstream-reader"),
            threading.Thread(target=self._sweep_expired, daemon=True, name="approval-sweeper"),
        ]
        if self._enable_tty_prompt:
            prompt = _TtyPrompt(self.broker)
            if prompt.available:
                threads.append(threading.Thread(target=prompt.run, daemon=True, name="tty-prompt"))
        for thread in threads:
            thread.start()

        self._shutdown.wait()
        self._teardown()
        return 1 if self._downstream_crashed else 0

    def _teardown(self) -> None:
        if self._control is not None:
            self._control.stop()
        if self._downstream is not None and self._downstream.poll() is None:
            try:
                self._downstream.stdin.close()
            except OSError:
                pass
            try:
                self._downstream.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._downstream.terminate()
                try:
                    self._downstream.wait(timeout=2)
                except subprocess.TimeoutExpired:
                    self._downstream.kill()

    # -- client -> downstream ----------------------------------------------

    def _pump_client(self) -> None:
        for line in self.stdin:
            line = line.strip()
            if not line:
                continue
            try:
                message = json.loads(line)
            except json.JSONDecodeError:
                self.pipeline.log_warning("malformed JSON-RPC line from client")
                self.stdout_writer.send(
                    {
                        "jsonrpc": "2.0",
                        "id": None,
                        "error": {"code": -32700, "message": "parse error"},
                    }
                )
                continue
            if isinstance(message, dict) and message.get("method") == "tools/call":
                worker = threading.Thread(
                    target=self._handle_tools_call, args=(message, line), daemon=True
                )
                worker.start()
                continue
            if isinstance(message, dict) and message.get("method") == "initialize":
                self._capture_client_info(message)
            self._forward_downstream(line)
        self._client_closed = True
        self._shutdown.set()

    def _capture_client_info(self, message: dict) -> None:
        info = (message.get("params") or {}).get("clientInfo") or {}
        name = info.get("name")
        if not name:
            return
        self.session.client_name = str(name)
        self.session.client_version = str(info.get("version", ""))
        self.audit.runtime = self.session.client_name
        self.pipeline.context = SessionContext(
            session_id=self.session.session_id,
            runtime=self.session.client_name,
            workspace_root=self.workspace,
            home=self._home,
        )

    def _forward_downstream(self, raw: str) -> None:
        writer = self._downstream_writer
        if writer is None or not writer.send_raw(raw):
            self._on_downstream_gone()

    def _handle_tools_call(self, message: dict, raw: str) -> None:
        msg_id = message.get("id", None)
        params = message.get("params") or {}
        tool = params.get("name")
        arguments = params.get("arguments") or {}
        if not isinstance(tool, str) or not tool or not isinstance(arguments, dict):
            self.pipeline.log_warning("tools/call with malformed params")
            if msg_id is not None:
                self.stdout_writer.send(
                    {
                        "jsonrpc": "2.0",
                        "id": msg_id,
                        "error": {"code": -32602, "message": "invalid tools/call params"},
                    }
                )
            return
        result = self.pipeline.handle_tool_call(tool, arguments)
        if result.forward:
            if msg_id is not None:
                with self._inflight_lock:
                    self._inflight[json.dumps(msg_id)] = msg_id
            self._forward_downstream(raw)
        elif msg_id is not None:
            self.stdout_writer.send(tool_error_response(msg_id, result.deny_message or "denied"))

    # -- downstream -> client ----------------------------------------------

    def _pump_downstream(self) -> None:
        assert self._downstream is not None and self._downstream.stdout is not None
        for line in self._downstream.stdout:
            stripped = line.strip()
            if not stripped:
                continue
            try:
                message = json.loads(stripped)
            except json.JSONDecodeError:
                message = None
            if isinstance(message, dict) and "id" in message and "method" not in message:
                with self._inflight_lock:
                    self._inflight.pop(json.dumps(message.get("id")), None)
            self.stdout_writer.send_raw(stripped)
        self._on_downstream_gone()

    def _on_downstream_gone(self) -> None:
        if self._shutdown.is_set():
            return
        if self._client_closed:
            self._shutdown.set()
            return
        self._downstream_crashed = True
        with self._inflight_lock:
            orphans = list(self._inflight.values())
            self._inflight.clear()
        for msg_id in orphans:
            self.stdout_writer.send(
                tool_error_response(msg_id, "AgentWall: downstream server exited before responding")
            )
        self.pipeline.log_warning(
            f"downstream server exited mid-session ({' '.join(self.downstream_command)})"
        )
        self._shutdown.set()

    # -- housekeeping --------------------------------------------------------

    def _sweep_expired(self) -> None:
        while not self._shutdown.is_set():
            self.broker.expire()
            self._shutdown.wait(_SWEEP_INTERVAL_SECONDS)


class _TtyPrompt:
    """Interactive approval prompt on the controlling terminal.

    The proxy's stdin/stdout carry the JSON-RPC wire, so prompts go
    through /dev/tty; when there is no controlling terminal the prompt
    simply stays disabled and approvals arrive via the control API.
    """

    def __init__(self, broker: ApprovalBroker):
        self.broker = broker
        self._queue: "list[str]" = []
        self._cv = threading.Condition()
        try:
            self._tty = open("/dev/tty", "r+", buffering=1)
            self.available = True
        except OSError:
            self._tty = None
            self.available = False
            return
        broker.add_listener(self._on_event)

    def _on_event(self, kind: str, request) -> None:
        if kind != "pending":
            return
        with self._cv:
            self._queue.append(request.id)
            self._cv.notify()

    def run(self) -> None:
        assert self._tty is not None
        while True:
            with self._cv:
                while not self._queue:
                    self._cv.wait()
                request_id = self._queue.pop(0)
            try:
                request = self.broker.get(request_id)
            except KeyError:
                continue
            if request.state.value != "pending":
                continue
            try:
                self._tty.write(f"agentwall: {request.summary()}\n[a]pprove / [r]eject? ")
                self._tty.flush()
                answer = self._tty.readline().strip().lower()
            except OSError:
                return
            try:
                self.broker.decide(
                    request.id, approve=answer in ("a", "approve", "y", "yes"),
                    via=DecisionChannel.TTY,
                )
            except (ApprovalConflictError, KeyError):
                continue  # resolved elsewhere first; nothing to do


def run_proxy(
    downstream_command: list[str],
    *,
    policy_path: Path,
    workspace: str | None = None,
    control_port: int | None = DEFAULT_CONTROL_PORT,
    session_dir: Path,
    agentwall_home: Path,
    ui_dir: Path | None = None,
    stdin=None,
    stdout=None,
    clock=time.time,
    home: str | None = None,
) -> int:
    """Run the proxy until either side closes. Returns the process exit code."""
    if not downstream_command:
        print("agentwall: no downstream command given (use -- <command> ...)", file=sys.stderr)
        return 2
    try:
        proxy = MCPProxy(
            downstream_command,
            policy_path=policy_path,
            workspace=workspace,
            session_dir=session_dir,
            agentwall_home=agentwall_home,
            control_port=control_port,
            ui_dir=ui_dir,
            stdin=stdin,
            stdout=stdout,
            clock=clock,
            home=home,
        )
    except PolicyError as exc:
        print(f"agentwall: cannot start, policy invalid:\n{exc}", file=sys.stderr)
        return 1
    except (SessionLogError, OSError) as exc:
        print(f"agentwall: cannot start: {exc}", file=sys.stderr)
        return 1
    return proxy.run()
