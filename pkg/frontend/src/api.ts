/**
 * Thin client over the AgentWall control API.
 *
 * Every mutation the dashboard can perform goes through decide(); the UI
 * holds no decision logic of its own. A 409 from the server means the
 * approval was resolved somewhere else first (another tab, the TTY
 * prompt, a timeout) and is surfaced as a normal outcome, not an error,
 * so callers can refresh quietly.
 */

import type { ApprovalView, SessionEvents, SessionSummary } from './types.js';

export type DecideOutcome =
  | { ok: true; request: ApprovalView }
  | { ok: false; conflict: true; state: string }
  | { ok: false; conflict: false; status: number; detail: string };

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`control API ${status}: ${detail}`);
  }
}

export class ControlApi {
  constructor(private baseUrl: string, private token: string) {}

  private headers(): Record<string, string> {
    return {
      Authorization: `Bearer ${this.token}`,
      'Content-Type': 'application/json',
    };
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.baseUrl + path, { headers: this.headers() });
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as T;
  }

  async health(): Promise<{ status: string; policy_version: string }> {
    return this.getJson('/v1/health');
  }

  async pendingApprovals(): Promise<ApprovalView[]> {
    const payload = await this.getJson<{ pending: ApprovalView[] }>('/v1/approvals/pending');
    return payload.pending;
  }

  async decide(requestId: string, decision: 'approve' | 'reject'): Promise<DecideOutcome> {
    const response = await fetch(
      `${this.baseUrl}/v1/approvals/${encodeURIComponent(requestId)}/decision`,
      {
        method: 'POST',
        headers: this.headers(),
        body: JSON.stringify({ decision }),
      },
    );
    if (response.ok) {
      return { ok: true, request: (await response.json()) as ApprovalView };
    }
    if (response.status === 409) {
      const body = (await response.json()) as { state?: string };
      return { ok: false, conflict: true, state: body.state ?? 'resolved' };
    }
    return { ok: false, conflict: false, status: response.status, detail: await response.text() };
  }

  async sessions(): Promise<SessionSummary[]> {
    const payload = await this.getJson<{ sessions: SessionSummary[] }>('/v1/sessions');
    return payload.sessions;
  }

  async sessionEvents(sessionId: string): Promise<SessionEvents> {
    return this.getJson(`/v1/sessions/${encodeURIComponent(sessionId)}/events`);
  }

  /** EventSource cannot send headers, so the stream URL carries the token. */
  streamUrl(): string {
    return `${this.baseUrl}/v1/events/stream?access_token=${encodeURIComponent(this.token)}`;
  }
}
