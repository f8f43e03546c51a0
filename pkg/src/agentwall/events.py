"""Live event fan-out for the control API stream and dashboard.

Each frame wraps one observable happening: a logged decision or warning,
an approval entering or leaving the pending set, or a policy reload. A
bounded ring of recent frames is replayed to late subscribers so a
dashboard opened mid-session sees context; slow subscribers are dropped
once their buffer overflows rather than ever back-pressuring the proxy
pipeline.
"""

from __future__ import annotations

import json
import queue
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Any


class FrameKind(Enum):
    DECISION = "decision"
    APPROVAL_PENDING = "approval_pending"
    APPROVAL_RESOLVED = "approval_resolved"
    POLICY_RELOADED = "policy_reloaded"
    WARNING = "warning"


@dataclass(frozen=True)
class StreamFrame:
    frame_id: int
    kind: FrameKind
    payload: dict[str, Any]

    def to_json(self) -> str:
        return json.dumps(
            {"frame_id": self.frame_id, "kind": self.kind.value, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )


class Subscription:
    """One consumer's bounded frame queue. Detached on overflow."""

    def __init__(self, backlog: list[StreamFrame], maxsize: int = 256):
        self.queue: "queue.Queue[StreamFrame]" = queue.Queue(maxsize=maxsize)
        self.alive = True
        for frame in backlog:
            self.queue.put_nowait(frame)

    def get(self, timeout: float | None = None) -> StreamFrame | None:
        try:
            return self.queue.get(timeout=timeout)
        except queue.Empty:
            return None


class EventBus:
    def __init__(self, *, replay_frames: int = 100):
        self._lock = threading.Lock()
        self._next_id = 1
        self._ring: list[StreamFrame] = []
        self._replay_frames = replay_frames
        self._subscriptions: list[Subscription] = []

    def publish(self, kind: FrameKind, payload: dict[str, Any]) -> StreamFrame:
        with self._lock:
            frame = StreamFrame(frame_id=self._next_id, kind=kind, payload=payload)
            self._next_id += 1
            self._ring.append(frame)
            if len(self._ring) > self._replay_frames:
                del self._ring[: -self._replay_frames]
            stale: list[Subscription] = []
            for sub in self._subscriptions:
                try:
                    sub.queue.put_nowait(frame)
                except queue.Full:
                    sub.alive = False
                    stale.append(sub)
            for sub in stale:
                self._subscriptions.remove(sub)
        return frame

    def subscribe(self) -> Subscription:
        with self._lock:
            sub = Subscription(backlog=list(self._ring))
            self._subscriptions.append(sub)
            return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            sub.alive = False
            if sub in self._subscriptions:
                self._subscriptions.remove(sub)
