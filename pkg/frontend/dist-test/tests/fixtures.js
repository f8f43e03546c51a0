/** Shared builders mirroring the wire shapes the control API produces. */
let seq = 0;
export function resetSeq() {
    seq = 0;
}
export function event(overrides = {}) {
    seq += 1;
    return {
        seq,
        ts: `2026-03-24T10:00:${String(seq % 60).padStart(2, '0')}.000Z`,
        session_id: 'bench-1',
        runtime: 'bench',
        tool: 'exec',
        action_type: 'execute',
        target: `command-${seq}`,
        decision: 'ALLOW',
        decided_by: 'policy',
        rule_id: 'allow-safe-exec',
        latency_ms: 0.12,
        policy_version: 'abc123',
        reload_detected: false,
        prev_hash: '0'.repeat(64),
        entry_hash: 'f'.repeat(64),
        ...overrides,
    };
}
export function approval(overrides = {}) {
    return {
        id: 'req-1',
        state: 'pending',
        action_type: 'execute',
        tool: 'exec',
        target: 'sudo apt-get install x',
        session_id: 'bench-1',
        runtime: 'bench',
        created_at: 1000,
        timeout_seconds: 120,
        decided_at: null,
        decided_via: null,
        ...overrides,
    };
}
let frameId = 0;
export function resetFrames() {
    frameId = 0;
}
export function frame(kind, payload) {
    frameId += 1;
    return { frame_id: frameId, kind, payload };
}
/** A 50-event session shaped like a full benchmark run: 33 ALLOW, 13 DENY,
 * 2 ASK escalations and their APPROVED / REJECTED outcomes. */
export function benchSessionEvents() {
    resetSeq();
    const decisions = [];
    decisions.push(['ALLOW', 'read_file'], ['DENY', 'read_file'], ['DENY', 'read_file']);
    decisions.push(['DENY', 'run_command'], ['DENY', 'run_command']);
    decisions.push(['ASK', 'run_command'], ['APPROVED', 'run_command']);
    decisions.push(['DENY', 'query']);
    decisions.push(['ASK', 'query'], ['REJECTED', 'query']);
    decisions.push(['ALLOW', 'write_file'], ['DENY', 'write_file']);
    decisions.push(['ALLOW', 'run_command'], ['DENY', 'run_command']);
    for (let i = 0; i < 30; i += 1)
        decisions.push(['ALLOW', 'exec']);
    for (let i = 0; i < 5; i += 1)
        decisions.push(['DENY', 'exec']);
    decisions.push(['DENY', 'run_command']);
    return decisions.map(([decision, tool]) => event({
        decision,
        tool,
        decided_by: decision === 'APPROVED' || decision === 'REJECTED'
            ? 'approval'
            : tool === 'exec' && decision === 'DENY'
                ? 'rate-limit'
                : 'policy',
        rule_id: decision === 'ALLOW' ? 'allow-rule' : decision === 'DENY' ? 'deny-rule' : null,
    }));
}
