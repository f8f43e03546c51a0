/**
 * ControlApi against a stub HTTP server that mimics the real control
 * surface: bearer auth, one-shot approval resolution with 409 conflicts,
 * and the session endpoints.
 */

import assert from 'node:assert/strict';
import { createServer, type Server } from 'node:http';
import { test, before, after, beforeEach } from 'node:test';

import { ApiError, ControlApi } from '../src/api.js';
import { approval, benchSessionEvents } from './fixtures.js';

const TOKEN = 'stub-token';

let server: Server;
let baseUrl: string;
let resolved: Map<string, string>;

before(async () => {
  resolved = new Map();
  server = createServer((request, response) => {
    const send = (status: number, payload: unknown) => {
      const body = JSON.stringify(payload);
      response.writeHead(status, { 'Content-Type': 'application/json' });
      response.end(body);
    };
    if (request.headers.authorization !== `Bearer ${TOKEN}`) {
      send(401, { error: 'missing or invalid bearer token' });
      return;
    }
    const url = new URL(request.url ?? '/', 'http://localhost');
    if (request.method === 'GET' && url.pathname === '/v1/approvals/pending') {
      send(200, { pending: [approval()] });
      return;
    }
    const decision = url.pathname.match(/^\/v1\/approvals\/([^/]+)\/decision$/);
    if (request.method === 'POST' && decision) {
      const id = decision[1]!;
      if (resolved.has(id)) {
        send(409, { error: 'already resolved', state: resolved.get(id), id });
        return;
      }
      let raw = '';
      request.on('data', (chunk) => (raw += chunk));
      request.on('end', () => {
        const body = JSON.parse(raw || '{}') as { decision?: string };
        const state = body.decision === 'approve' ? 'approved' : 'rejected';
        resolved.set(id, state);
        send(200, { ...approval({ id, state: state as never, decided_via: 'api' }) });
      });
      return;
    }
    if (request.method === 'GET' && url.pathname === '/v1/sessions') {
      send(200, {
        sessions: [
          {
            session_id: 'bench-1', file: 'session-2026-03-24.jsonl', events: 50,
            first_ts: 'a', last_ts: 'b', runtime: 'bench',
          },
        ],
      });
      return;
    }
    if (request.method === 'GET' && url.pathname.startsWith('/v1/sessions/')) {
      send(200, {
        session_id: 'bench-1', chain_ok: true, corrupt_seq: null,
        events: benchSessionEvents(),
      });
      return;
    }
    send(404, { error: 'no such endpoint' });
  });
  await new Promise<void>((ok) => server.listen(0, '127.0.0.1', ok));
  const address = server.address();
  if (address === null || typeof address === 'string') throw new Error('no port');
  baseUrl = `http://127.0.0.1:${address.port}`;
});

after(() => server.close());

beforeEach(() => resolved.clear());

test('bad token raises ApiError with the status', async () => {
  const api = new ControlApi(baseUrl, 'wrong');
  await assert.rejects(
    () => api.pendingApprovals(),
    (error: unknown) => error instanceof ApiError && error.status === 401,
  );
});

test('pending approvals round-trip', async () => {
  const api = new ControlApi(baseUrl, TOKEN);
  const pending = await api.pendingApprovals();
  assert.equal(pending.length, 1);
  assert.equal(pending[0]!.target, 'sudo apt-get install x');
});

test('approve resolves and echoes the server state', async () => {
  const api = new ControlApi(baseUrl, TOKEN);
  const outcome = await api.decide('req-9', 'approve');
  assert.ok(outcome.ok);
  assert.equal(outcome.request.state, 'approved');
  assert.equal(outcome.request.decided_via, 'api');
});

test('two tabs racing on one approval: exactly one success, one quiet conflict', async () => {
  const tabA = new ControlApi(baseUrl, TOKEN);
  const tabB = new ControlApi(baseUrl, TOKEN);
  const [first, second] = await Promise.all([
    tabA.decide('contested', 'approve'),
    tabB.decide('contested', 'reject'),
  ]);
  const winners = [first, second].filter((o) => o.ok);
  const conflicts = [first, second].filter((o) => !o.ok && o.conflict);
  assert.equal(winners.length, 1);
  assert.equal(conflicts.length, 1);
  const conflict = conflicts[0]!;
  assert.ok(conflict.conflict && ['approved', 'rejected'].includes(conflict.state));
});

test('session events carry the chain verdict for the banner', async () => {
  const api = new ControlApi(baseUrl, TOKEN);
  const detail = await api.sessionEvents('bench-1');
  assert.equal(detail.chain_ok, true);
  assert.equal(detail.events.length, 50);
});

test('stream URL embeds the token for EventSource', () => {
  const api = new ControlApi('http://x:1', 'se cret');
  assert.equal(api.streamUrl(), 'http://x:1/v1/events/stream?access_token=se%20cret');
});
