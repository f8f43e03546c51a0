/** Trace-view filters. All set fields must hold (conjunction). */

import type { AuditEvent, Decision } from './types.js';

export interface TraceFilter {
  decision?: string;
  tool?: string;
  since?: string;
  until?: string;
}

export function applyTraceFilter(events: AuditEvent[], filter: TraceFilter): AuditEvent[] {
  return events.filter((event) => {
    if (filter.decision && event.decision !== filter.decision.toUpperCase()) return false;
    if (filter.tool && event.tool !== filter.tool) return false;
    if (filter.since && event.ts < filter.since) return false;
    if (filter.until && event.ts > filter.until) return false;
    return true;
  });
}

export function decisionCounts(events: AuditEvent[]): Record<string, number> {
  const counts: Record<string, number> = {};
  for (const event of events) {
    counts[event.decision] = (counts[event.decision] ?? 0) + 1;
  }
  return counts;
}

export function uniqueTools(events: AuditEvent[]): string[] {
  return [...new Set(events.map((e) => e.tool))].sort();
}

export const DECISION_OPTIONS: Decision[] = [
  'ALLOW',
  'DENY',
  'ASK',
  'APPROVED',
  'REJECTED',
  'TIMED_OUT',
  'WARNING',
];
