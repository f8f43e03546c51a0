/**
 * Dashboard state: a reducer over stream frames.
 *
 * The server replays its last frames on every (re)connect, so the store
 * dedupes by frame_id — a frame at or below the high-water mark is
 * dropped before it can duplicate a feed row or resurrect a resolved
 * approval. Pending approvals mirror the server registry within one
 * frame of any change; the feed is bounded so a long session cannot grow
 * memory without limit.
 */
export const FEED_LIMIT = 200;
export function initialState() {
    return {
        connection: 'RECONNECTING',
        pending: [],
        feed: [],
        selectedSession: null,
        sessionEvents: [],
        chainOk: null,
        policyVersion: null,
        lastFrameId: 0,
    };
}
export class DashboardStore {
    state = initialState();
    listeners = [];
    get current() {
        return this.state;
    }
    subscribe(listener) {
        this.listeners.push(listener);
        return () => {
            this.listeners = this.listeners.filter((l) => l !== listener);
        };
    }
    emit() {
        for (const listener of this.listeners)
            listener(this.state);
    }
    setConnection(connection) {
        if (this.state.connection !== connection) {
            this.state = { ...this.state, connection };
            this.emit();
        }
    }
    /** Replace the pending list from a REST fetch (initial load, conflict refresh). */
    setPending(pending) {
        this.state = { ...this.state, pending: pending.filter((p) => p.state === 'pending') };
        this.emit();
    }
    selectSession(sessionId, events, chainOk) {
        this.state = {
            ...this.state,
            selectedSession: sessionId,
            sessionEvents: [...events].sort((a, b) => a.seq - b.seq),
            chainOk,
        };
        this.emit();
    }
    /** Apply one stream frame; replayed duplicates are ignored. Returns
     * whether the frame was fresh. */
    applyFrame(frame) {
        if (frame.frame_id <= this.state.lastFrameId) {
            return false;
        }
        const next = { ...this.state, lastFrameId: frame.frame_id };
        next.feed = [...next.feed, frame].slice(-FEED_LIMIT);
        switch (frame.kind) {
            case 'approval_pending': {
                const view = frame.payload;
                if (!next.pending.some((p) => p.id === view.id)) {
                    next.pending = [...next.pending, view];
                }
                break;
            }
            case 'approval_resolved': {
                const view = frame.payload;
                next.pending = next.pending.filter((p) => p.id !== view.id);
                break;
            }
            case 'decision':
            case 'warning': {
                const event = frame.payload;
                if (next.selectedSession !== null &&
                    event.session_id === next.selectedSession &&
                    !next.sessionEvents.some((e) => e.seq === event.seq)) {
                    next.sessionEvents = [...next.sessionEvents, event];
                }
                break;
            }
            case 'policy_reloaded': {
                const payload = frame.payload;
                next.policyVersion = payload.policy_version ?? next.policyVersion;
                break;
            }
        }
        this.state = next;
        this.emit();
        return true;
    }
}
