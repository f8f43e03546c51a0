import assert from 'node:assert/strict';
import { test, beforeEach } from 'node:test';

import {
  escapeHtml,
  renderApprovalCard,
  renderApprovalQueue,
  renderChainBanner,
  renderFeedItem,
  renderTraceTable,
} from '../src/render.js';
import { approval, benchSessionEvents, event, frame, resetFrames, resetSeq } from './fixtures.js';

beforeEach(() => {
  resetFrames();
  resetSeq();
});

test('approval card shows type, tool, target, age, and remaining timeout', () => {
  const html = renderApprovalCard(
    approval({ created_at: 1000, timeout_seconds: 120 }),
    1030, // 30s old, 90s remaining
  );
  assert.match(html, /execute/);
  assert.match(html, /exec/);
  assert.match(html, /sudo apt-get install x/);
  assert.match(html, /30s old/);
  assert.match(html, /1m30s left/);
  assert.match(html, /data-action="approve"/);
  assert.match(html, /data-action="reject"/);
});

test('card controls carry the request id, nothing auto-fires', () => {
  const html = renderApprovalCard(approval({ id: 'abc123' }), 1000);
  const buttons = html.match(/<button[^>]*>/g) ?? [];
  assert.equal(buttons.length, 2);
  assert.ok(buttons.every((b) => b.includes('data-id="abc123"')));
  assert.ok(buttons.every((b) => b.includes('type="button"')));
});

test('queue renders an explicit empty state', () => {
  assert.match(renderApprovalQueue([], 0), /No pending approvals/);
});

test('hostile target text is escaped', () => {
  const html = renderApprovalCard(
    approval({ target: '<script>alert(1)</script>' }),
    1000,
  );
  assert.doesNotMatch(html, /<script>alert/);
  assert.match(html, /&lt;script&gt;/);
});

test('escapeHtml covers quotes for attribute positions', () => {
  assert.equal(escapeHtml(`a"b'c`), 'a&quot;b&#39;c');
});

test('trace table renders one row per event with badges and rule ids', () => {
  const events = benchSessionEvents();
  const html = renderTraceTable(events, true);
  const rows = html.match(/<tr data-seq=/g) ?? [];
  assert.equal(rows.length, 50);
  assert.match(html, /badge-allow/);
  assert.match(html, /badge-deny/);
  assert.match(html, /badge-ask/);
  assert.match(html, /deny-rule/);
  assert.match(html, /0\.120/); // latency column, 3 decimals
  assert.match(html, /Hash chain verified/);
});

test('broken chain banner names the corrupt seq', () => {
  const html = renderChainBanner(false, 17);
  assert.match(html, /CHAIN BROKEN at seq 17/);
  assert.equal(renderChainBanner(null, null), '');
});

test('trace table with no matches keeps the banner and says so', () => {
  const html = renderTraceTable([], false, 3);
  assert.match(html, /CHAIN BROKEN at seq 3/);
  assert.match(html, /No events match/);
});

test('reload marker appears on the reloaded decision row', () => {
  const html = renderTraceTable([event({ reload_detected: true })], true);
  assert.match(html, /badge-reload/);
});

test('feed items cover every frame kind', () => {
  const items = [
    renderFeedItem(frame('decision', { ...event({ decision: 'DENY' }) })),
    renderFeedItem(frame('approval_pending', { ...approval() })),
    renderFeedItem(frame('approval_resolved', { ...approval({ state: 'approved' }) })),
    renderFeedItem(frame('policy_reloaded', { policy_version: 'cafebabe000' })),
    renderFeedItem(frame('warning', { ...event({ decision: 'WARNING', decided_by: 'warning' }) })),
  ];
  assert.match(items[0]!, /DENY/);
  assert.match(items[1]!, /PENDING/);
  assert.match(items[2]!, /APPROVED/);
  assert.match(items[3]!, /POLICY RELOADED/);
  assert.match(items[4]!, /WARNING/);
  // dedupe hook for the DOM layer: every item carries its frame id
  items.forEach((item, i) => assert.match(item, new RegExp(`data-frame="${i + 1}"`)));
});
