import assert from 'node:assert/strict';
import { test, beforeEach } from 'node:test';
import { applyTraceFilter, decisionCounts, uniqueTools } from '../src/filters.js';
import { benchSessionEvents, event, resetSeq } from './fixtures.js';
beforeEach(() => resetSeq());
test('decision filter is exact and case-insensitive on input', () => {
    const events = [event({ decision: 'DENY' }), event({ decision: 'ALLOW' })];
    assert.equal(applyTraceFilter(events, { decision: 'deny' }).length, 1);
    assert.equal(applyTraceFilter(events, { decision: 'DENY' })[0].decision, 'DENY');
});
test('filters compose conjunctively', () => {
    const events = [
        event({ decision: 'DENY', tool: 'exec' }),
        event({ decision: 'DENY', tool: 'read_file' }),
        event({ decision: 'ALLOW', tool: 'exec' }),
    ];
    const filtered = applyTraceFilter(events, { decision: 'DENY', tool: 'exec' });
    assert.equal(filtered.length, 1);
    assert.equal(filtered[0].tool, 'exec');
});
test('time range bounds are inclusive ISO comparisons', () => {
    const events = [
        event({ ts: '2026-03-24T10:00:01.000Z' }),
        event({ ts: '2026-03-24T10:00:05.000Z' }),
        event({ ts: '2026-03-24T10:00:09.000Z' }),
    ];
    const filtered = applyTraceFilter(events, {
        since: '2026-03-24T10:00:05.000Z',
        until: '2026-03-24T10:00:09.000Z',
    });
    assert.deepEqual(filtered.map((e) => e.ts), ['2026-03-24T10:00:05.000Z', '2026-03-24T10:00:09.000Z']);
});
test('empty filter returns everything', () => {
    const events = benchSessionEvents();
    assert.equal(applyTraceFilter(events, {}).length, 50);
});
test('bench-shaped session counts add up', () => {
    const events = benchSessionEvents();
    const counts = decisionCounts(events);
    assert.equal(counts.ALLOW, 33);
    assert.equal(counts.DENY, 13);
    assert.equal(counts.ASK, 2);
    assert.equal(counts.APPROVED, 1);
    assert.equal(counts.REJECTED, 1);
    assert.equal(Object.values(counts).reduce((a, b) => a + b, 0), 50);
});
test('rate-limited span filters down to exec denials', () => {
    const events = benchSessionEvents();
    const denials = applyTraceFilter(events, { decision: 'DENY', tool: 'exec' });
    assert.equal(denials.length, 5);
    assert.ok(denials.every((e) => e.decided_by === 'rate-limit'));
});
test('uniqueTools sorts and dedupes', () => {
    const events = benchSessionEvents();
    assert.deepEqual(uniqueTools(events), [
        'exec',
        'query',
        'read_file',
        'run_command',
        'write_file',
    ]);
});
