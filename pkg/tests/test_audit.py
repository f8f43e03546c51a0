"""Hash-chained session log: append, verify, tamper detection, replay."""

from __future__ import annotations

import json
import random

import pytest

from agentwall.audit import (
    AuditWriter,
    GENESIS_HASH,
    ReplayFilters,
    SessionNotFoundError,
    find_session_file,
    read_events,
    render_table,
    replay,
    verify_chain,
)


class TickClock:
    def __init__(self, start: float = 1_770_000_000.0):
        self.now = start

    def __call__(self) -> float:
        self.now += 0.05
        return self.now


def write_events(tmp_path, count: int, session_id: str = "s1", clock=None):
    writer = AuditWriter(tmp_path, session_id, runtime="client", clock=clock or TickClock())
    events = []
    decisions = ["ALLOW", "DENY", "ASK"]
    for i in range(count):
        events.append(
            writer.append(
                tool="exec",
                action_type="execute",
                target=f"command-{i}",
                decision=decisions[i % 3],
                decided_by="policy",
                rule_id=f"rule-{i % 3}",
                latency_ms=0.1 + i * 0.01,
                policy_version="abc123",
            )
        )
    return writer, events


class TestAppend:
    def test_first_event_has_genesis_prev_hash(self, tmp_path):
        _, events = write_events(tmp_path, 1)
        assert events[0].prev_hash == GENESIS_HASH
        assert events[0].seq == 1

    def test_chain_links_and_seq_increment(self, tmp_path):
        _, events = write_events(tmp_path, 5)
        for prev, nxt in zip(events, events[1:]):
            assert nxt.prev_hash == prev.entry_hash
            assert nxt.seq == prev.seq + 1

    def test_jsonl_round_trip(self, tmp_path):
        writer, events = write_events(tmp_path, 10)
        read_back = read_events(writer.path)
        assert read_back == events

    def test_same_day_sessions_share_file_and_chain(self, tmp_path):
        clock = TickClock()
        writer1 = AuditWriter(tmp_path, "s1", clock=clock)
        e1 = writer1.append(tool="a", action_type="execute", target="x", decision="ALLOW",
                            decided_by="policy")
        writer2 = AuditWriter(tmp_path, "s2", clock=clock)
        e2 = writer2.append(tool="b", action_type="execute", target="y", decision="DENY",
                            decided_by="policy")
        assert writer1.path == writer2.path
        assert e2.seq == e1.seq + 1
        assert e2.prev_hash == e1.entry_hash
        assert verify_chain(writer1.path) is None

    def test_unwritable_directory_refused(self, tmp_path):
        # A regular file where the directory should be: cannot be created
        # or written, so the writer must refuse to start.
        blocker = tmp_path / "blocked"
        blocker.write_text("in the way")
        with pytest.raises(Exception):
            AuditWriter(blocker / "sessions", "s1")

    def test_rate_limit_attribution_fields(self, tmp_path):
        writer, _ = write_events(tmp_path, 0)
        event = writer.append(
            tool="exec", action_type="execute", target="ls", decision="DENY",
            decided_by="rate-limit", rule_id=None,
        )
        assert event.decided_by == "rate-limit"
        assert event.rule_id is None


class TestVerifyChain:
    def test_intact_chain_ok(self, tmp_path):
        writer, _ = write_events(tmp_path, 50)
        assert verify_chain(writer.path) is None

    def test_empty_file_ok(self, tmp_path):
        path = tmp_path / "session-2026-01-01.jsonl"
        path.write_text("")
        assert verify_chain(path) is None

    def test_single_byte_flip_detected_at_that_seq(self, tmp_path):
        writer, _ = write_events(tmp_path, 30)
        lines = writer.path.read_text().splitlines()
        target_line = 17
        mutated = lines[target_line - 1].replace("command-16", "command-XX", 1)
        lines[target_line - 1] = mutated
        writer.path.write_text("\n".join(lines) + "\n")
        assert verify_chain(writer.path) == target_line

    def test_unparseable_line_reported_at_line_number(self, tmp_path):
        writer, _ = write_events(tmp_path, 5)
        lines = writer.path.read_text().splitlines()
        lines[2] = "this is not json"
        writer.path.write_text("\n".join(lines) + "\n")
        assert verify_chain(writer.path) == 3

    def test_line_deletion_detected(self, tmp_path):
        writer, _ = write_events(tmp_path, 10)
        lines = writer.path.read_text().splitlines()
        del lines[4]
        writer.path.write_text("\n".join(lines) + "\n")
        assert verify_chain(writer.path) == 5

    def test_line_reordering_detected(self, tmp_path):
        writer, _ = write_events(tmp_path, 10)
        lines = writer.path.read_text().splitlines()
        lines[2], lines[3] = lines[3], lines[2]
        writer.path.write_text("\n".join(lines) + "\n")
        assert verify_chain(writer.path) == 3

    def test_randomized_single_byte_mutations(self, tmp_path):
        """Any in-line byte substitution is caught at exactly its line's seq."""
        writer, _ = write_events(tmp_path, 40)
        original = writer.path.read_bytes()
        lines = original.decode().splitlines(keepends=True)
        offsets = []
        pos = 0
        for line in lines:
            offsets.append((pos, pos + len(line.rstrip("\n"))))
            pos += len(line)
        rng = random.Random(42)
        for _ in range(100):
            line_index = rng.randrange(len(lines))
            start, end = offsets[line_index]
            byte_index = rng.randrange(start, end)
            replacement = rng.randrange(32, 127)
            while replacement == original[byte_index]:
                replacement = rng.randrange(32, 127)
            mutated = bytearray(original)
            mutated[byte_index] = replacement
            writer.path.write_bytes(bytes(mutated))
            assert verify_chain(writer.path) == line_index + 1, (
                f"mutation at byte {byte_index} (line {line_index + 1}) missed"
            )
        writer.path.write_bytes(original)
        assert verify_chain(writer.path) is None


class TestRecovery:
    def test_torn_final_line_ignored_by_readers(self, tmp_path):
        writer, events = write_events(tmp_path, 4)
        with open(writer.path, "a", encoding="utf-8") as handle:
            handle.write('{"seq": 5, "ts": "2026-01-0')  # simulated crash mid-write
        assert read_events(writer.path) == events

    def test_writer_resumes_chain_after_torn_line(self, tmp_path):
        clock = TickClock()
        writer, events = write_events(tmp_path, 4, clock=clock)
        with open(writer.path, "a", encoding="utf-8") as handle:
            handle.write('{"broken')
        resumed = AuditWriter(tmp_path, "s2", clock=clock)
        event = resumed.append(tool="t", action_type="execute", target="x",
                               decision="ALLOW", decided_by="policy")
        assert event.seq == 5
        assert event.prev_hash == events[-1].entry_hash


class TestReplay:
    def test_replay_orders_and_verifies(self, tmp_path):
        writer, events = write_events(tmp_path, 9)
        result = replay(writer.path)
        assert result.chain_ok is True
        assert [e.seq for e in result.events] == list(range(1, 10))

    def test_filters_compose_conjunctively(self, tmp_path):
        writer, _ = write_events(tmp_path, 9)
        result = replay(writer.path, ReplayFilters(decision="DENY", tool="exec"))
        assert all(e.decision == "DENY" and e.tool == "exec" for e in result.events)
        assert len(result.events) == 3

    def test_session_filter(self, tmp_path):
        clock = TickClock()
        w1 = AuditWriter(tmp_path, "s1", clock=clock)
        w1.append(tool="a", action_type="execute", target="x", decision="ALLOW",
                  decided_by="policy")
        w2 = AuditWriter(tmp_path, "s2", clock=clock)
        w2.append(tool="b", action_type="execute", target="y", decision="DENY",
                  decided_by="policy")
        result = replay(w1.path, ReplayFilters(session_id="s2"))
        assert [e.tool for e in result.events] == ["b"]

    def test_missing_file_lists_available(self, tmp_path):
        writer, _ = write_events(tmp_path, 1)
        with pytest.raises(SessionNotFoundError) as exc:
            find_session_file(tmp_path, date="1999-01-01")
        assert writer.path.name in str(exc.value)

    def test_empty_session_renders_ok_header(self, tmp_path):
        path = tmp_path / "session-2026-01-01.jsonl"
        path.write_text("")
        table = render_table(replay(path))
        assert "0 events" in table
        assert "chain OK" in table

    def test_table_contains_rows_and_header(self, tmp_path):
        writer, _ = write_events(tmp_path, 3)
        table = render_table(replay(writer.path))
        assert "DECISION" in table
        assert "command-0" in table
        lines = [l for l in table.splitlines() if l and not l.startswith(("#", "-", "SEQ"))]
        assert len(lines) == 3

    def test_replay_result_json_shape(self, tmp_path):
        writer, _ = write_events(tmp_path, 2)
        payload = replay(writer.path).to_dict()
        assert payload["chain_ok"] is True
        assert len(payload["events"]) == 2
        round_tripped = json.loads(json.dumps(payload))
        assert round_tripped["events"][0]["seq"] == 1
