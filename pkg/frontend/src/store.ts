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

import type {
  ApprovalView,
  AuditEvent,
  Connection,
  StreamFrame,
} from './types.js';

export const FEED_LIMIT = 200;

export interface DashboardState {
  connection: Connection;
  pending: ApprovalView[];
  feed: StreamFrame[];
  selectedSession: string | null;
  sessionEvents: AuditEvent[];
  chainOk: boolean | null;
  policyVersion: string | null;
  lastFrameId: number;
}

export function initialState(): DashboardState {
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

type Listener = (state: DashboardState) => void;

export class DashboardStore {
  private state: DashboardState = initialState();
  private listeners: Listener[] = [];

  get current(): DashboardState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  setConnection(connection: Connection): void {
    if (this.state.connection !== connection) {
      this.state = { ...this.state, connection };
      this.emit();
    }
  }

  /** Replace the pending list from a REST fetch (initial load, conflict refresh). */
  setPending(pending: ApprovalView[]): void {
    this.state = { ...this.state, pending: pending.filter((p) => p.state === 'pending') };
    this.emit();
  }

  selectSession(sessionId: string | null, events: AuditEvent[], chainOk: boolean | null): void {
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
  applyFrame(frame: StreamFrame): boolean {
    if (frame.frame_id <= this.state.lastFrameId) {
      return false;
    }
    const next: DashboardState = { ...this.state, lastFrameId: frame.frame_id };
    next.feed = [...next.feed, frame].slice(-FEED_LIMIT);

    switch (frame.kind) {
      case 'approval_pending': {
        const view = frame.payload as unknown as ApprovalView;
        if (!next.pending.some((p) => p.id === view.id)) {
          next.pending = [...next.pending, view];
        }
        break;
      }
      case 'approval_resolved': {
        const view = frame.payload as unknown as ApprovalView;
        next.pending = next.pending.filter((p) => p.id !== view.id);
        break;
      }
      case 'decision':
      case 'warning': {
        const event = frame.payload as unknown as AuditEvent;
        if (
          next.selectedSession !== null &&
          event.session_id === next.selectedSession &&
          !next.sessionEvents.some((e) => e.seq === event.seq)
        ) {
          next.sessionEvents = [...next.sessionEvents, event];
        }
        break;
      }
      case 'policy_reloaded': {
        const payload = frame.payload as { policy_version?: string };
        next.policyVersion = payload.policy_version ?? next.policyVersion;
        break;
      }
    }

    this.state = next;
    this.emit();
    return true;
  }
}
