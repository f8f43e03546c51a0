"""Acceptance suite: one test per release criterion, each printing a
pass/fail line (run with ``pytest tests/test_acceptance.py -v -s``).

The criteria pin the enforced behavior of the shipped default policy:
verdicts for all fourteen benchmark cases (including the deliberate
prefix-match quirk on case 4 and its exact-path fix), sub-millisecond
evaluation latency, exact sliding-window rate limiting against a
brute-force oracle, a tamper-evident 50-event audit session, full
interposition through the real proxy, hot-reload safety, and fail-closed
handling of unknown tools, timeouts, and unmatched actions.
"""

from __future__ import annotations

import json
import random
import time
from pathlib import Path

import pytest

from agentwall.approvals import ApprovalState
from agentwall.audit import read_events, verify_chain
from agentwall.bench import THROUGH_PROXY, run_bench
from agentwall.defaults import DEFAULT_POLICY_YAML, exact_path_variant
from agentwall.policy import Verdict
from agentwall.ratelimit import RateStatus, RateWindow

from conftest import FakeClock, build_pipeline

EXPECTED_ACTUAL_COLUMN = {
    1: "ALLOW", 2: "DENY", 3: "DENY", 4: "DENY", 5: "DENY", 6: "ASK", 7: "DENY",
    8: "ASK", 9: "ALLOW", 10: "DENY", 11: "ALLOW", 12: "DENY", 13: "DENY@31", 14: "DENY",
}


def report(line: str) -> None:
    print(f"[ACCEPTANCE PASS] {line}", flush=True)


@pytest.fixture(scope="module")
def bench_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("acceptance-bench")
    policy = tmp / "policy.yaml"
    policy.write_text(DEFAULT_POLICY_YAML, encoding="utf-8")
    started = time.monotonic()
    result = run_bench(policy, clock_start=1_770_000_000.0)
    elapsed = time.monotonic() - started
    return result, elapsed


class TestCriterion1Table1Reproduction:
    def test_all_fourteen_verdicts_match(self, bench_run):
        result, elapsed = bench_run
        for case in result.cases:
            assert case.actual == EXPECTED_ACTUAL_COLUMN[case.number], (
                f"case {case.number}: expected {EXPECTED_ACTUAL_COLUMN[case.number]}, "
                f"got {case.actual}"
            )
            assert case.passed, f"case {case.number} reported as failed"
        assert result.rate_sequence == ["ALLOW"] * 30 + ["DENY(rate-limit)"] * 5
        case14 = next(c for c in result.cases if c.number == 14)
        assert case14.reload_detected is True
        assert elapsed < 10.0, f"bench took {elapsed:.1f}s, limit 10s"
        report(
            f"Table-1 reproduction: 14/14 verdicts match (row 4 = DENY pinned, "
            f"row 13 = 30xALLOW+5xDENY(rate-limit), row 14 reload) in {elapsed:.2f}s"
        )


class TestCriterion2ExactPathVariant:
    def test_variant_flips_row_4_to_ask(self, tmp_path):
        policy = tmp_path / "variant.yaml"
        policy.write_text(exact_path_variant(), encoding="utf-8")
        result = run_bench(policy, clock_start=1_770_000_000.0)
        case4 = next(c for c in result.cases if c.number == 4)
        assert case4.actual == "ASK"
        others = [c for c in result.cases if c.number != 4]
        assert all(c.actual == EXPECTED_ACTUAL_COLUMN[c.number] for c in others)
        report("exact_path variant flips case 4 DENY -> ASK; all other verdicts unchanged")


class TestCriterion3Latency:
    def test_average_under_1ms_p95_under_2ms(self, bench_run):
        result, _ = bench_run
        assert len(result.latencies_ms) == 43
        assert result.avg_latency_ms < 1.0, f"avg {result.avg_latency_ms:.3f} ms >= 1 ms"
        assert result.p95_latency_ms < 2.0, f"p95 {result.p95_latency_ms:.3f} ms >= 2 ms"
        report(
            f"latency over {len(result.latencies_ms)} evaluations: "
            f"avg {result.avg_latency_ms:.3f} ms < 1 ms, "
            f"p95 {result.p95_latency_ms:.3f} ms < 2 ms"
        )


class TestCriterion4RateLimitOracle:
    def test_thousand_randomized_sequences_match_brute_force(self):
        rng = random.Random(0xA6E27)
        sequences = 0
        for _ in range(1000):
            n = rng.randint(1, 80)
            t = rng.uniform(0, 1000)
            timestamps = []
            for _ in range(n):
                t += rng.choice(
                    [rng.uniform(0, 0.5), rng.uniform(0, 5), rng.uniform(0, 70)]
                )
                timestamps.append(t)

            window = RateWindow("exec", max_calls=30, window_seconds=60)
            allowed: list[float] = []
            oracle_allowed: list[float] = []
            for ts in timestamps:
                got = window.check_and_consume(now=ts) is RateStatus.ALLOWED
                # brute force: scan the full history of allowed calls
                expected = sum(1 for u in oracle_allowed if ts - 60 < u <= ts) < 30
                assert got == expected, f"divergence at t={ts}"
                if got:
                    allowed.append(ts)
                if expected:
                    oracle_allowed.append(ts)
            # interval property: every 60s half-open window holds <= 30 allows
            for end in allowed:
                assert sum(1 for u in allowed if end - 60 < u <= end) <= 30
            sequences += 1
        assert sequences == 1000
        report("rate-limit oracle: 1000 randomized sequences match brute force; "
               "every 60s interval holds <= 30 ALLOWs")


class TestCriterion5AuditIntegrity:
    def test_fifty_events_chain_ok_and_tampering_detected(self, bench_run, tmp_path):
        result, _ = bench_run
        session = Path(result.session_file)
        events = read_events(session)
        assert len(events) == 50, f"expected 50 decision events, found {len(events)}"
        assert verify_chain(session) is None

        working = tmp_path / "tampered.jsonl"
        original = session.read_bytes()
        text = original.decode()
        line_spans = []
        position = 0
        for line in text.splitlines(keepends=True):
            line_spans.append((position, position + len(line.rstrip("\n"))))
            position += len(line)

        rng = random.Random(0xD15EA5E)
        detected = 0
        for _ in range(100):
            line_index = rng.randrange(len(line_spans))
            start, end = line_spans[line_index]
            byte_index = rng.randrange(start, end)
            replacement = rng.randrange(32, 127)
            while replacement == original[byte_index]:
                replacement = rng.randrange(32, 127)
            mutated = bytearray(original)
            mutated[byte_index] = replacement
            working.write_bytes(bytes(mutated))
            corrupt_seq = verify_chain(working)
            assert corrupt_seq == line_index + 1, (
                f"mutation in line {line_index + 1} reported at {corrupt_seq}"
            )
            detected += 1
        assert detected == 100
        report("audit integrity: 50-event bench session verifies; 100/100 random "
               "single-byte tamper trials detected at the correct seq")


class TestCriterion6InterpositionCompleteness:
    def test_mock_receives_exactly_the_allowed_and_approved_calls(self, bench_run, tmp_path):
        policy = tmp_path / "policy.yaml"
        policy.write_text(DEFAULT_POLICY_YAML, encoding="utf-8")
        result = run_bench(policy, mode=THROUGH_PROXY, session_dir=tmp_path / "sessions")
        assert result.passed == result.total == 14

        # transport adds no semantics: same verdicts as the in-process run
        in_process, _ = bench_run
        assert [c.actual for c in result.cases] == [c.actual for c in in_process.cases]

        events = read_events(Path(result.session_file))
        assert len(events) == 50
        assert verify_chain(Path(result.session_file)) is None

        forwarded_expected: dict[str, int] = {}
        blocked = 0
        for event in events:
            if event.decision in ("ALLOW", "APPROVED"):
                forwarded_expected[event.tool] = forwarded_expected.get(event.tool, 0) + 1
            elif event.decision in ("DENY", "REJECTED", "TIMED_OUT"):
                blocked += 1

        mock_calls = [
            json.loads(line)
            for line in Path(result.mock_log).read_text().splitlines()
            if line
        ]
        received: dict[str, int] = {}
        for call in mock_calls:
            received[call["tool"]] = received.get(call["tool"], 0) + 1

        assert received == forwarded_expected, (
            f"mock saw {received}, audit says {forwarded_expected}"
        )
        assert sum(received.values()) == sum(forwarded_expected.values()) == 34
        assert blocked == 14  # 7 policy denies + 5 rate denies + 1 reload deny + 1 reject
        report(
            "interposition: mock downstream received exactly the 34 ALLOW/APPROVED "
            "calls; all 14 blocked decisions never reached it"
        )


class TestCriterion7HotReloadSafety:
    def test_invalid_then_valid_replacement(self, tmp_path):
        policy = tmp_path / "policy.yaml"
        policy.write_text(DEFAULT_POLICY_YAML, encoding="utf-8")
        clock = FakeClock()
        pipeline = build_pipeline(tmp_path, policy, clock)

        probes = [
            ("read_file", {"path": "~/.ssh/id_rsa"}, Verdict.DENY),
            ("exec", {"command": "ls -la"}, Verdict.ALLOW),
            ("exec", {"command": "rm -rf /tmp/test"}, Verdict.DENY),
        ]
        for tool, args, want in probes:
            clock.advance(1)
            assert pipeline.handle_tool_call(tool, args).final_record.verdict is want

        policy.write_text("version: [broken", encoding="utf-8")
        for tool, args, want in probes:
            clock.advance(1)
            record = pipeline.handle_tool_call(tool, args).final_record
            assert record.verdict is want, "verdict changed under invalid policy file"
            assert record.reload_detected is False
        warnings = [e for e in read_events(pipeline.audit.path) if e.decided_by == "warning"]
        assert len(warnings) >= 1

        policy.write_text(
            "version: 1\nrules:\n"
            "  - {id: deny-everything-exec, action: execute, command_pattern: '*',"
            " decision: deny}\n",
            encoding="utf-8",
        )
        clock.advance(1)
        record = pipeline.handle_tool_call("exec", {"command": "ls -la"}).final_record
        assert record.verdict is Verdict.DENY
        assert record.rule_id == "deny-everything-exec"
        assert record.reload_detected is True
        report("hot-reload safety: invalid file changed zero verdicts and logged a "
               "warning; valid file applied on the very next evaluation")


class TestCriterion8FailClosed:
    def test_unknown_tool_escalates(self, tmp_path, policy_file, fake_clock):
        pipeline = build_pipeline(tmp_path, policy_file, fake_clock,
                                  approval_timeout_seconds=0)
        result = pipeline.handle_tool_call("totally_new_tool", {"anything": True})
        assert result.forward is False
        assert result.records[0].verdict is Verdict.ASK  # escalated, never forwarded silently

    def test_approval_timeout_denies(self, tmp_path, policy_file, fake_clock):
        pipeline = build_pipeline(tmp_path, policy_file, fake_clock,
                                  approval_timeout_seconds=0)
        result = pipeline.handle_tool_call("exec", {"command": "sudo rm -rf /"})
        assert result.forward is False
        assert result.approval.state is ApprovalState.TIMED_OUT
        assert "approval-timeout" in result.deny_message

    def test_unmatched_action_gets_default_ask(self, tmp_path, policy_file, fake_clock):
        pipeline = build_pipeline(tmp_path, policy_file, fake_clock,
                                  approval_timeout_seconds=0)
        result = pipeline.handle_tool_call("delete_file", {"path": "scratch.txt"})
        assert result.records[0].verdict is Verdict.ASK
        assert result.records[0].rule_id is None
        report("fail-closed: unknown tool escalated, approval timeout denied, "
               "unmatched action fell to the ASK default")
