"""The decision pipeline every intercepted tool call flows through.

Order is fixed: hot-reload probe, action mapping, rate check, policy
evaluation, then (for ASK) the approval gate. The rate check runs before
policy so over-budget calls fail fast and are attributed to the rate
limiter; budget is consumed by every call that passes the check, whatever
policy later says. Each decision is appended to the audit log before the
caller is allowed to respond.

The pipeline itself is transport-agnostic: the stdio proxy wraps it per
request, and the benchmark harness drives it directly in-process.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

from .actions import ActionProposal, MappingError, SessionContext, map_tool_call
from .approvals import ApprovalBroker, ApprovalRequest, ApprovalState
from .audit import AuditWriter
from .events import EventBus, FrameKind
from .policy import PolicyEngine, Verdict
from .ratelimit import RateLimiter, RateStatus

DECIDED_BY_POLICY = "policy"
DECIDED_BY_RATE_LIMIT = "rate-limit"
DECIDED_BY_APPROVAL = "approval"
DECIDED_BY_WARNING = "warning"

# Audit decision labels for resolved approvals, keyed by terminal state.
_APPROVAL_DECISION = {
    ApprovalState.APPROVED: "APPROVED",
    ApprovalState.REJECTED: "REJECTED",
    ApprovalState.TIMED_OUT: "TIMED_OUT",
}


@dataclass(frozen=True)
class DecisionRecord:
    action: ActionProposal
    verdict: Verdict
    decided_by: str
    rule_id: str | None
    latency_ms: float
    policy_version: str
    reload_detected: bool

    def __post_init__(self) -> None:
        if self.decided_by == DECIDED_BY_RATE_LIMIT:
            assert self.verdict is Verdict.DENY and self.rule_id is None


@dataclass
class PipelineResult:
    """What the transport should do with the intercepted call."""

    forward: bool
    deny_message: str | None
    records: list[DecisionRecord]
    approval: ApprovalRequest | None = None

    @property
    def final_record(self) -> DecisionRecord:
        return self.records[-1]


class DecisionPipeline:
    def __init__(
        self,
        *,
        engine: PolicyEngine,
        limiter: RateLimiter,
        broker: ApprovalBroker,
        audit: AuditWriter,
        context: SessionContext,
        bus: EventBus | None = None,
        clock: Callable[[], float] = time.time,
        approval_timeout_seconds: float | None = None,
    ):
        self.engine = engine
        self.limiter = limiter
        self.broker = broker
        self.audit = audit
        self.context = context
        self.bus = bus
        self.clock = clock
        self._approval_timeout_override = approval_timeout_seconds
        broker.add_listener(self._on_approval_event)
        # The writer invokes this inside its append lock, so stream frames
        # carry events in exactly the order the log has them.
        audit.set_on_event(self._on_audit_event)
        self.latencies_ms: list[float] = []

    # -- wiring ---------------------------------------------------------

    def _on_approval_event(self, kind: str, request: ApprovalRequest) -> None:
        if self.bus is None:
            return
        frame_kind = (
            FrameKind.APPROVAL_PENDING if kind == "pending" else FrameKind.APPROVAL_RESOLVED
        )
        self.bus.publish(frame_kind, request.to_dict(self.clock()))

    def _on_audit_event(self, event) -> None:
        if self.bus is not None:
            kind = FrameKind.WARNING if event.decided_by == DECIDED_BY_WARNING else FrameKind.DECISION
            self.bus.publish(kind, event.to_dict())

    def log_warning(self, message: str, *, tool: str = "", action_type: str = "") -> None:
        self.audit.append(
            tool=tool,
            action_type=action_type,
            target=message,
            decision="WARNING",
            decided_by=DECIDED_BY_WARNING,
            policy_version=self.engine.document.content_hash,
        )

    def _log_record(self, record: DecisionRecord, decision_label: str | None = None):
        return self.audit.append(
            tool=record.action.tool,
            action_type=record.action.action_type.value,
            target=record.action.target_summary,
            decision=decision_label or record.verdict.name,
            decided_by=record.decided_by,
            rule_id=record.rule_id,
            latency_ms=record.latency_ms,
            policy_version=record.policy_version,
            reload_detected=record.reload_detected,
        )

    # -- the pipeline ---------------------------------------------------

    def handle_tool_call(
        self, tool: str, arguments: dict, *, wait_for_approval: bool = True
    ) -> PipelineResult:
        """Run one tool call through reload, mapping, rate, policy, approval.

        Returns only after every produced decision is in the audit log.
        With ``wait_for_approval`` the calling thread blocks on an ASK
        until a human (or the timeout) resolves it; unrelated calls on
        other threads keep flowing.
        """
        reload_detected, warning = self.engine.check_reload()
        policy_version = self.engine.document.content_hash
        if warning is not None:
            self.log_warning(warning)
        if reload_detected:
            self.limiter.configure(self.engine.document.rate_limits)
            if self.bus is not None:
                self.bus.publish(FrameKind.POLICY_RELOADED, {"policy_version": policy_version})

        now = self.clock()
        try:
            action = map_tool_call(
                tool,
                arguments,
                self.engine.document.tool_mappings,
                self.context,
                received_at=now,
            )
        except MappingError as exc:
            self.audit.append(
                tool=tool,
                action_type=exc.action_type.value,
                target=f"unmappable: {exc.reason}",
                decision=Verdict.DENY.name,
                decided_by=DECIDED_BY_POLICY,
                policy_version=policy_version,
                reload_detected=reload_detected,
            )
            return PipelineResult(
                forward=False,
                deny_message=f"AgentWall: DENY reason=unmappable ({exc.reason})",
                records=[],
            )

        if self.limiter.check_and_consume(tool, now) is RateStatus.LIMITED:
            record = DecisionRecord(
                action=action,
                verdict=Verdict.DENY,
                decided_by=DECIDED_BY_RATE_LIMIT,
                rule_id=None,
                latency_ms=0.0,
                policy_version=policy_version,
                reload_detected=reload_detected,
            )
            self._log_record(record)
            return PipelineResult(
                forward=False,
                deny_message=f"AgentWall: DENY by=rate-limit tool={tool}",
                records=[record],
            )

        verdict, rule_id, latency_ms = self.engine.evaluate(action)
        self.latencies_ms.append(latency_ms)
        record = DecisionRecord(
            action=action,
            verdict=verdict,
            decided_by=DECIDED_BY_POLICY,
            rule_id=rule_id,
            latency_ms=latency_ms,
            policy_version=policy_version,
            reload_detected=reload_detected,
        )
        self._log_record(record)

        if verdict is Verdict.ALLOW:
            return PipelineResult(forward=True, deny_message=None, records=[record])
        if verdict is Verdict.DENY:
            return PipelineResult(
                forward=False,
                deny_message=f"AgentWall: DENY rule={rule_id or 'default'}",
                records=[record],
            )

        # ASK: escalate and (normally) block this call awaiting resolution.
        timeout = (
            self._approval_timeout_override
            if self._approval_timeout_override is not None
            else self.engine.document.defaults.approval_timeout_seconds
        )
        request = self.broker.submit(action, timeout)
        if not wait_for_approval:
            return PipelineResult(
                forward=False, deny_message=None, records=[record], approval=request
            )
        resolved = self.broker.wait(request.id)
        outcome = DecisionRecord(
            action=action,
            verdict=Verdict.ALLOW if resolved.state is ApprovalState.APPROVED else Verdict.DENY,
            decided_by=DECIDED_BY_APPROVAL,
            rule_id=None,
            latency_ms=0.0,
            policy_version=policy_version,
            reload_detected=False,
        )
        self._log_record(outcome, decision_label=_APPROVAL_DECISION[resolved.state])
        if resolved.state is ApprovalState.APPROVED:
            return PipelineResult(
                forward=True, deny_message=None, records=[record, outcome], approval=resolved
            )
        reason = (
            "approval-timeout"
            if resolved.state is ApprovalState.TIMED_OUT
            else "approval-rejected"
        )
        return PipelineResult(
            forward=False,
            deny_message=f"AgentWall: DENY reason={reason} rule={rule_id or 'default'}",
            records=[record, outcome],
            approval=resolved,
        )
