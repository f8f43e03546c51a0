"""Per-tool sliding-window call caps.

A window keeps the exact timestamps of calls that consumed budget; a
probe first prunes everything at least ``window_seconds`` old (half-open
window: a timestamp exactly that old is gone) and then either records
the new call or reports it limited. Only calls that pass the check
consume budget, and in the decision pipeline only those calls go on to
policy evaluation, so over-limit traffic is attributed to the rate
limiter rather than to a rule.

State is in-memory and per-process: the caps defend a live session, not
history across restarts. Callers inject the clock.
"""

from __future__ import annotations

import threading
from collections import deque
from enum import Enum
from typing import Iterable

from .policy import RateLimitConfig


class RateStatus(Enum):
    ALLOWED = "allowed"
    LIMITED = "limited"


class RateWindow:
    """Sliding window for one tool. Not thread-safe on its own."""

    def __init__(self, tool: str, max_calls: int, window_seconds: float):
        if max_calls < 1 or window_seconds <= 0:
            raise ValueError("max_calls must be >= 1 and window_seconds positive")
        self.tool = tool
        self.max_calls = max_calls
        self.window_seconds = window_seconds
        self.timestamps: deque[float] = deque()

    def check_and_consume(self, now: float) -> RateStatus:
        """Prune, then admit the call iff budget remains in (now - w, now]."""
        cutoff = now - self.window_seconds
        while self.timestamps and self.timestamps[0] <= cutoff:
            self.timestamps.popleft()
        if len(self.timestamps) < self.max_calls:
            self.timestamps.append(now)
            return RateStatus.ALLOWED
        return RateStatus.LIMITED


class RateLimiter:
    """Thread-safe registry of per-tool windows built from policy config.

    Tools without a configured cap are never limited.
    """

    def __init__(self, limits: Iterable[RateLimitConfig] = ()):
        self._lock = threading.Lock()
        self._windows: dict[str, RateWindow] = {}
        self.configure(limits)

    def configure(self, limits: Iterable[RateLimitConfig]) -> None:
        """Apply (possibly reloaded) limit configs, preserving window state
        for tools whose parameters are unchanged."""
        with self._lock:
            fresh: dict[str, RateWindow] = {}
            for limit in limits:
                existing = self._windows.get(limit.tool)
                if (
                    existing is not None
                    and existing.max_calls == limit.max_calls
                    and existing.window_seconds == limit.window_seconds
                ):
                    fresh[limit.tool] = existing
                else:
                    fresh[limit.tool] = RateWindow(
                        limit.tool, limit.max_calls, limit.window_seconds
                    )
            self._windows = fresh

    def check_and_consume(self, tool: str, now: float) -> RateStatus:
        with self._lock:
            window = self._windows.get(tool)
            if window is None:
                return RateStatus.ALLOWED
            return window.check_and_consume(now)
