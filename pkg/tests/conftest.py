from __future__ import annotations

from pathlib import Path

import pytest

from agentwall.actions import SessionContext
from agentwall.approvals import ApprovalBroker
from agentwall.audit import AuditWriter
from agentwall.defaults import DEFAULT_POLICY_YAML
from agentwall.events import EventBus
from agentwall.pipeline import DecisionPipeline
from agentwall.policy import PolicyEngine
from agentwall.ratelimit import RateLimiter


class FakeClock:
    def __init__(self, start: float = 1_770_000_000.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


@pytest.fixture
def fake_clock():
    return FakeClock()


@pytest.fixture
def policy_file(tmp_path: Path) -> Path:
    path = tmp_path / "policy.yaml"
    path.write_text(DEFAULT_POLICY_YAML, encoding="utf-8")
    return path


def build_pipeline(
    tmp_path: Path,
    policy_file: Path,
    clock: FakeClock,
    *,
    bus: EventBus | None = None,
    approval_timeout_seconds: float | None = None,
    home: str = "/home/u",
    workspace: str = "/home/u/proj",
):
    engine = PolicyEngine(policy_file, home=home)
    broker = ApprovalBroker(clock=clock)
    audit = AuditWriter(tmp_path / "sessions", "test-session", runtime="tests", clock=clock)
    pipeline = DecisionPipeline(
        engine=engine,
        limiter=RateLimiter(engine.document.rate_limits),
        broker=broker,
        audit=audit,
        context=SessionContext(
            session_id="test-session", runtime="tests",
            workspace_root=workspace, home=home,
        ),
        bus=bus,
        clock=clock,
        approval_timeout_seconds=approval_timeout_seconds,
    )
    return pipeline
