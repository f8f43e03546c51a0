/**
 * Thin client over the AgentWall control API.
 *
 * Every mutation the dashboard can perform goes through decide(); the UI
 * holds no decision logic of its own. A 409 from the server means the
 * approval was resolved somewhere else first (another tab, the TTY
 * prompt, a timeout) and is surfaced as a normal outcome, not an error,
 * so callers can refresh quietly.
 */
export class ApiError extends Error {
    status;
    constructor(status, detail) {
        super(`control API ${status}: ${detail}`);
        this.status = status;
    }
}
export class ControlApi {
    baseUrl;
    token;
    constructor(baseUrl, token) {
        this.baseUrl = baseUrl;
        this.token = token;
    }
    headers() {
        return {
            Authorization: `Bearer ${this.token}`,
            'Content-Type': 'application/json',
        };
    }
    async getJson(path) {
        const response = await fetch(this.baseUrl + path, { headers: this.headers() });
        if (!response.ok) {
            throw new ApiError(response.status, await response.text());
        }
        return (await response.json());
    }
    async health() {
        return this.getJson('/v1/health');
    }
    async pendingApprovals() {
        const payload = await this.getJson('/v1/approvals/pending');
        return payload.pending;
    }
    async decide(requestId, decision) {
        const response = await fetch(`${this.baseUrl}/v1/approvals/${encodeURIComponent(requestId)}/decision`, {
            method: 'POST',
            headers: this.headers(),
            body: JSON.stringify({ decision }),
        });
        if (response.ok) {
            return { ok: true, request: (await response.json()) };
        }
        if (response.status === 409) {
            const body = (await response.json());
            return { ok: false, conflict: true, state: body.state ?? 'resolved' };
        }
        return { ok: false, conflict: false, status: response.status, detail: await response.text() };
    }
    async sessions() {
        const payload = await this.getJson('/v1/sessions');
        return payload.sessions;
    }
    async sessionEvents(sessionId) {
        return this.getJson(`/v1/sessions/${encodeURIComponent(sessionId)}/events`);
    }
    /** EventSource cannot send headers, so the stream URL carries the token. */
    streamUrl() {
        return `${this.baseUrl}/v1/events/stream?access_token=${encodeURIComponent(this.token)}`;
    }
}
