/**
 * Wire types shared with the AgentWall control API.
 *
 * AuditEvent mirrors one line of the hash-chained session log; decisions
 * beyond the policy verdicts record approval outcomes and warnings.
 */
export {};
