"""Registry of ASK-escalated actions awaiting a human decision.

Every request moves PENDING -> APPROVED | REJECTED | TIMED_OUT exactly
once; any later attempt to resolve it is a conflict carrying the prior
state. No code path here turns a pending request into execution without
an explicit approval, and an unattended request always times out into a
denial (fail-closed).

The broker is shared by the proxy pipeline (which blocks per request),
the TTY prompt, the control API, and the expiry sweeper; transitions are
serialized under one lock, and waiting happens on a per-request event so
one blocked call never stalls the others.
"""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .actions import ActionProposal


class ApprovalState(Enum):
    PENDING = "pending"
    APPROVED = "approved"
    REJECTED = "rejected"
    TIMED_OUT = "timed_out"


class DecisionChannel(Enum):
    TTY = "tty"
    API = "api"


class UnknownApprovalError(KeyError):
    def __init__(self, request_id: str):
        super().__init__(request_id)
        self.request_id = request_id


class ApprovalConflictError(RuntimeError):
    """The request was already resolved; carries the state it is stuck in."""

    def __init__(self, request_id: str, state: ApprovalState):
        super().__init__(f"approval {request_id} already {state.value}")
        self.request_id = request_id
        self.state = state


@dataclass
class ApprovalRequest:
    id: str
    action: ActionProposal
    created_at: float
    timeout_seconds: float
    state: ApprovalState = ApprovalState.PENDING
    decided_at: float | None = None
    decided_via: DecisionChannel | None = None
    _resolved: threading.Event = field(default_factory=threading.Event, repr=False)

    @property
    def deadline(self) -> float:
        return self.created_at + self.timeout_seconds

    def remaining(self, now: float) -> float:
        return max(0.0, self.deadline - now)

    def summary(self) -> str:
        a = self.action
        return f"{a.action_type.value} via {a.tool}: {a.target_summary}"

    def to_dict(self, now: float | None = None) -> dict:
        payload = {
            "id": self.id,
            "state": self.state.value,
            "action_type": self.action.action_type.value,
            "tool": self.action.tool,
            "target": self.action.target_summary,
            "session_id": self.action.session_id,
            "runtime": self.action.runtime,
            "created_at": self.created_at,
            "timeout_seconds": self.timeout_seconds,
            "decided_at": self.decided_at,
            "decided_via": self.decided_via.value if self.decided_via else None,
        }
        if now is not None:
            payload["remaining_seconds"] = self.remaining(now) if self.state is ApprovalState.PENDING else 0.0
        return payload


Listener = Callable[[str, ApprovalRequest], None]


class ApprovalBroker:
    def __init__(self, *, clock: Callable[[], float] = time.time):
        self._clock = clock
        self._lock = threading.Lock()
        self._requests: dict[str, ApprovalRequest] = {}
        self._listeners: list[Listener] = []

    def add_listener(self, listener: Listener) -> None:
        """Register a callback for ("pending"|"resolved", request) events.

        Callbacks run synchronously on the transitioning thread and must
        not block; anything slow (a prompt, a network push) should only
        enqueue.
        """
        self._listeners.append(listener)

    def _notify(self, kind: str, request: ApprovalRequest) -> None:
        for listener in list(self._listeners):
            listener(kind, request)

    def submit(self, action: ActionProposal, timeout_seconds: float) -> ApprovalRequest:
        now = self._clock()
        request = ApprovalRequest(
            id=secrets.token_hex(4),
            action=action,
            created_at=now,
            timeout_seconds=timeout_seconds,
        )
        with self._lock:
            self._requests[request.id] = request
        self._notify("pending", request)
        # Degenerate zero timeout resolves on the spot, still fail-closed.
        if timeout_seconds <= 0:
            self.expire(now)
        return request

    def get(self, request_id: str) -> ApprovalRequest:
        with self._lock:
            request = self._requests.get(request_id)
        if request is None:
            raise UnknownApprovalError(request_id)
        return request

    def pending(self) -> list[ApprovalRequest]:
        with self._lock:
            return [r for r in self._requests.values() if r.state is ApprovalState.PENDING]

    def decide(self, request_id: str, approve: bool, via: DecisionChannel) -> ApprovalRequest:
        """Resolve a pending request exactly once; conflicts name the prior state."""
        with self._lock:
            request = self._requests.get(request_id)
            if request is None:
                raise UnknownApprovalError(request_id)
            if request.state is not ApprovalState.PENDING:
                raise ApprovalConflictError(request_id, request.state)
            request.state = ApprovalState.APPROVED if approve else ApprovalState.REJECTED
            request.decided_at = self._clock()
            request.decided_via = via
            request._resolved.set()
        self._notify("resolved", request)
        return request

    def expire(self, now: float | None = None) -> list[ApprovalRequest]:
        """Transition every pending request past its deadline to TIMED_OUT."""
        now = self._clock() if now is None else now
        expired: list[ApprovalRequest] = []
        with self._lock:
            for request in self._requests.values():
                if request.state is ApprovalState.PENDING and now >= request.deadline:
                    request.state = ApprovalState.TIMED_OUT
                    request.decided_at = now
                    request._resolved.set()
                    expired.append(request)
        for request in expired:
            self._notify("resolved", request)
        return expired

    def wait(self, request_id: str, *, poll_seconds: float = 0.25) -> ApprovalRequest:
        """Block until the request is terminal, enforcing its own deadline.

        Re-checks the injected clock at least every ``poll_seconds`` of
        real time, so deadlines driven by a test clock are honored
        promptly too.
        """
        request = self.get(request_id)
        while True:
            if request._resolved.is_set():
                return request
            now = self._clock()
            if now >= request.deadline:
                self.expire(now)
                return request
            request._resolved.wait(timeout=min(poll_seconds, request.remaining(now)) or poll_seconds)
