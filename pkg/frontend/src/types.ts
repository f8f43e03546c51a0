/**
 * Wire types shared with the AgentWall control API.
 *
 * AuditEvent mirrors one line of the hash-chained session log; decisions
 * beyond the policy verdicts record approval outcomes and warnings.
 */

export type Decision =
  | 'ALLOW'
  | 'DENY'
  | 'ASK'
  | 'APPROVED'
  | 'REJECTED'
  | 'TIMED_OUT'
  | 'WARNING';

export type DecidedBy = 'policy' | 'rate-limit' | 'approval' | 'warning';

export interface AuditEvent {
  seq: number;
  ts: string;
  session_id: string;
  runtime: string;
  tool: string;
  action_type: string;
  target: string;
  decision: Decision;
  decided_by: DecidedBy;
  rule_id: string | null;
  latency_ms: number;
  policy_version: string;
  reload_detected: boolean;
  prev_hash: string;
  entry_hash: string;
}

export type ApprovalState = 'pending' | 'approved' | 'rejected' | 'timed_out';

export interface ApprovalView {
  id: string;
  state: ApprovalState;
  action_type: string;
  tool: string;
  target: string;
  session_id: string;
  runtime: string;
  created_at: number;
  timeout_seconds: number;
  decided_at: number | null;
  decided_via: 'tty' | 'api' | null;
  remaining_seconds?: number;
}

export type FrameKind =
  | 'decision'
  | 'approval_pending'
  | 'approval_resolved'
  | 'policy_reloaded'
  | 'warning';

export interface StreamFrame {
  frame_id: number;
  kind: FrameKind;
  payload: Record<string, unknown>;
}

export interface SessionSummary {
  session_id: string;
  file: string;
  events: number;
  first_ts: string;
  last_ts: string;
  runtime: string;
}

export interface SessionEvents {
  session_id: string;
  chain_ok: boolean;
  corrupt_seq: number | null;
  events: AuditEvent[];
}

export type Connection = 'LIVE' | 'RECONNECTING';
