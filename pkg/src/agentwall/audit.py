"""Hash-chained JSONL session log: append, verify, replay.

Every decision becomes one JSON line in a per-day session file
(``session-YYYY-MM-DD.jsonl``; same-day sessions share the file and are
told apart by session_id). Each entry's ``entry_hash`` is a SHA-256 over
the previous entry's hash concatenated with the canonical serialization
of every other field, so any interior mutation, reordering, or deletion
breaks verification at the first affected sequence number. Truncating
the tail of the file is the one edit a bare hash chain cannot see; that
needs an external head anchor and is out of scope here.

Replay reconstructs the decision trace from the log; it never re-executes
anything.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterator

GENESIS_HASH = "0" * 64

# Ordered for table rendering; also the canonical field set of one entry.
EVENT_FIELDS = (
    "seq", "ts", "session_id", "runtime", "tool", "action_type", "target",
    "decision", "decided_by", "rule_id", "latency_ms", "policy_version",
    "reload_detected", "prev_hash", "entry_hash",
)


class SessionLogError(RuntimeError):
    pass


class SessionNotFoundError(SessionLogError):
    def __init__(self, wanted: str, available: list[str]):
        hint = ", ".join(available) if available else "none"
        super().__init__(f"no session log for {wanted}; available: {hint}")
        self.available = available


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    ts: str
    session_id: str
    runtime: str
    tool: str
    action_type: str
    target: str
    decision: str
    decided_by: str  # policy | rate-limit | approval | warning
    rule_id: str | None
    latency_ms: float
    policy_version: str
    reload_detected: bool
    prev_hash: str
    entry_hash: str

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"),
                          ensure_ascii=False)

    @staticmethod
    def from_dict(raw: dict) -> "AuditEvent":
        kwargs = {name: raw[name] for name in EVENT_FIELDS}
        return AuditEvent(**kwargs)


def _canonical_body(fields: dict) -> str:
    body = {k: v for k, v in fields.items() if k not in ("prev_hash", "entry_hash")}
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def compute_entry_hash(fields: dict, prev_hash: str) -> str:
    payload = prev_hash + _canonical_body(fields)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _iso_millis(epoch_seconds: float) -> str:
    dt = datetime.fromtimestamp(epoch_seconds, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{int(dt.microsecond / 1000):03d}Z"


def session_file_name(epoch_seconds: float) -> str:
    day = datetime.fromtimestamp(epoch_seconds, tz=timezone.utc).strftime("%Y-%m-%d")
    return f"session-{day}.jsonl"


class AuditWriter:
    """Single serialized writer appending to one session file.

    The constructor fails if the directory cannot be created or written:
    a proxy must never run unlogged. If the file already holds a chain
    (an earlier same-day session), the writer continues it, skipping a
    partially written final line.
    """

    def __init__(
        self,
        directory: Path,
        session_id: str,
        *,
        runtime: str = "",
        clock: Callable[[], float] = time.time,
        on_event: Callable[[AuditEvent], None] | None = None,
    ):
        self.directory = Path(directory)
        self.session_id = session_id
        self.runtime = runtime
        self._clock = clock
        self._on_event = on_event
        self._lock = threading.Lock()
        # _on_event fires inside the append lock so observers (the stream
        # fan-out) see events in exactly the order the log has them.
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            probe = self.directory / ".write-probe"
            probe.write_bytes(b"")
            probe.unlink()
        except OSError as exc:
            raise SessionLogError(f"session log directory not writable: {exc}") from exc
        self.path = self.directory / session_file_name(self._clock())
        self._seq, self._prev_hash = self._recover_chain_tail()

    def set_on_event(self, on_event: Callable[[AuditEvent], None]) -> None:
        self._on_event = on_event

    def _recover_chain_tail(self) -> tuple[int, str]:
        if not self.path.exists():
            return 0, GENESIS_HASH
        last: dict | None = None
        for event_dict in iter_event_dicts(self.path):
            last = event_dict
        if last is None:
            return 0, GENESIS_HASH
        return int(last["seq"]), str(last["entry_hash"])

    def append(
        self,
        *,
        tool: str,
        action_type: str,
        target: str,
        decision: str,
        decided_by: str,
        rule_id: str | None = None,
        latency_ms: float = 0.0,
        policy_version: str = "",
        reload_detected: bool = False,
        runtime: str | None = None,
    ) -> AuditEvent:
        """Serialize one event, append it, and flush before returning.

        The caller responds to the client only after this returns, so the
        log is always write-ahead of anything the agent observes.
        """
        with self._lock:
            self._seq += 1
            fields = {
                "seq": self._seq,
                "ts": _iso_millis(self._clock()),
                "session_id": self.session_id,
                "runtime": self.runtime if runtime is None else runtime,
                "tool": tool,
                "action_type": action_type,
                "target": target,
                "decision": decision,
                "decided_by": decided_by,
                "rule_id": rule_id,
                "latency_ms": round(latency_ms, 3),
                "policy_version": policy_version,
                "reload_detected": reload_detected,
            }
            entry_hash = compute_entry_hash(fields, self._prev_hash)
            event = AuditEvent(prev_hash=self._prev_hash, entry_hash=entry_hash, **fields)
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(event.to_json_line() + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            self._prev_hash = entry_hash
            if self._on_event is not None:
                self._on_event(event)
        return event


def iter_event_dicts(path: Path) -> Iterator[dict]:
    """Yield parsed event dicts, skipping torn or unparseable lines.

    Readers stay lenient so a live dashboard can follow a file mid-write;
    strictness belongs to verify_chain, which reports exactly where a
    damaged file breaks.
    """
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().split("\n")
    for line in lines:
        if not line:
            continue
        try:
            raw = json.loads(line)
            yield {name: raw[name] for name in EVENT_FIELDS}
        except (json.JSONDecodeError, KeyError, TypeError):
            continue


def read_events(path: Path) -> list[AuditEvent]:
    return [AuditEvent.from_dict(d) for d in iter_event_dicts(path)]


def verify_chain(path: Path) -> int | None:
    """Walk the file recomputing the chain; None means intact.

    Returns the 1-based sequence number of the first corrupt entry. An
    unparseable line counts as corruption at its own line number.
    """
    with open(path, "r", encoding="utf-8") as handle:
        lines = [line for line in handle.read().split("\n") if line != ""]
    prev_hash = GENESIS_HASH
    for position, line in enumerate(lines, start=1):
        try:
            raw = json.loads(line)
            fields = {name: raw[name] for name in EVENT_FIELDS}
        except (json.JSONDecodeError, KeyError, TypeError):
            return position
        if fields["seq"] != position:
            return position
        if fields["prev_hash"] != prev_hash:
            return position
        if compute_entry_hash(fields, prev_hash) != fields["entry_hash"]:
            return position
        prev_hash = fields["entry_hash"]
    return None


def list_session_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        return []
    return sorted(directory.glob("session-*.jsonl"))


def find_session_file(directory: Path, *, date: str | None = None) -> Path:
    """Locate a session file by date (defaults to the newest one)."""
    files = list_session_files(directory)
    names = [f.name for f in files]
    if date is not None:
        candidate = directory / f"session-{date}.jsonl"
        if candidate not in files:
            raise SessionNotFoundError(f"date {date}", names)
        return candidate
    if not files:
        raise SessionNotFoundError("latest session", names)
    return files[-1]


@dataclass(frozen=True)
class ReplayFilters:
    session_id: str | None = None
    decision: str | None = None
    tool: str | None = None
    since: str | None = None  # inclusive ISO timestamp prefix or full form
    until: str | None = None

    def accept(self, event: AuditEvent) -> bool:
        if self.session_id is not None and event.session_id != self.session_id:
            return False
        if self.decision is not None and event.decision != self.decision.upper():
            return False
        if self.tool is not None and event.tool != self.tool:
            return False
        if self.since is not None and event.ts < self.since:
            return False
        if self.until is not None and event.ts > self.until:
            return False
        return True


@dataclass(frozen=True)
class ReplayResult:
    path: Path
    chain_ok: bool
    corrupt_seq: int | None
    events: tuple[AuditEvent, ...]

    def to_dict(self) -> dict:
        return {
            "file": str(self.path),
            "chain_ok": self.chain_ok,
            "corrupt_seq": self.corrupt_seq,
            "events": [e.to_dict() for e in self.events],
        }


def replay(path: Path, filters: ReplayFilters | None = None) -> ReplayResult:
    """Reconstruct a session's decision sequence (filtered, seq order)."""
    if not Path(path).exists():
        raise SessionNotFoundError(str(path), [f.name for f in list_session_files(Path(path).parent)])
    filters = filters or ReplayFilters()
    corrupt = verify_chain(path)
    events = tuple(e for e in read_events(path) if filters.accept(e))
    return ReplayResult(path=Path(path), chain_ok=corrupt is None, corrupt_seq=corrupt,
                        events=events)


_TABLE_COLUMNS = (
    ("seq", 4), ("ts", 24), ("session_id", 12), ("tool", 12), ("action_type", 8),
    ("decision", 9), ("decided_by", 10), ("rule_id", 24), ("latency_ms", 10),
    ("target", 40),
)


def render_table(result: ReplayResult) -> str:
    """Human-readable aligned table with a chain-status header line."""
    status = "chain OK" if result.chain_ok else f"CHAIN BROKEN at seq {result.corrupt_seq}"
    lines = [f"# {result.path.name}: {len(result.events)} events, {status}"]
    header = "  ".join(name.upper().ljust(width) for name, width in _TABLE_COLUMNS)
    lines.append(header)
    lines.append("-" * len(header))
    for event in result.events:
        row = []
        for name, width in _TABLE_COLUMNS:
            value = getattr(event, name)
            text = "-" if value is None else str(value)
            if len(text) > width and name == "target":
                text = text[: width - 1] + "…"
            row.append(text.ljust(width))
        lines.append("  ".join(row).rstrip())
    return "\n".join(lines)
