/**
 * Pure HTML renderers. Everything user-controlled is escaped; approve
 * and reject controls are plain buttons with data attributes that the
 * app layer wires up — nothing in here ever triggers a decision itself.
 */
export function escapeHtml(value) {
    return String(value)
        .replaceAll('&', '&amp;')
        .replaceAll('<', '&lt;')
        .replaceAll('>', '&gt;')
        .replaceAll('"', '&quot;')
        .replaceAll("'", '&#39;');
}
function formatAge(seconds) {
    if (seconds < 60)
        return `${Math.max(0, Math.floor(seconds))}s`;
    if (seconds < 3600)
        return `${Math.floor(seconds / 60)}m${Math.floor(seconds % 60)}s`;
    return `${Math.floor(seconds / 3600)}h${Math.floor((seconds % 3600) / 60)}m`;
}
export function renderApprovalCard(view, nowSeconds) {
    const age = formatAge(nowSeconds - view.created_at);
    const remaining = Math.max(0, view.created_at + view.timeout_seconds - nowSeconds);
    const stale = view.state !== 'pending';
    return `
<article class="approval-card${stale ? ' stale' : ''}" data-approval-id="${escapeHtml(view.id)}">
  <header>
    <span class="badge badge-ask">${escapeHtml(view.action_type)}</span>
    <span class="tool">${escapeHtml(view.tool)}</span>
    <span class="age" title="waiting">${age} old</span>
    <span class="remaining" title="time before automatic deny">${formatAge(remaining)} left</span>
  </header>
  <code class="target">${escapeHtml(view.target)}</code>
  <footer>
    <button type="button" data-action="approve" data-id="${escapeHtml(view.id)}">Approve</button>
    <button type="button" data-action="reject" data-id="${escapeHtml(view.id)}">Reject</button>
  </footer>
</article>`.trim();
}
export function renderApprovalQueue(pending, nowSeconds) {
    if (pending.length === 0) {
        return '<p class="empty-state">No pending approvals. The agent is within policy.</p>';
    }
    return pending.map((view) => renderApprovalCard(view, nowSeconds)).join('\n');
}
const DECISION_CLASS = {
    ALLOW: 'badge-allow',
    APPROVED: 'badge-allow',
    DENY: 'badge-deny',
    REJECTED: 'badge-deny',
    TIMED_OUT: 'badge-deny',
    ASK: 'badge-ask',
    WARNING: 'badge-warning',
};
export function renderDecisionBadge(decision) {
    const cls = DECISION_CLASS[decision] ?? 'badge-warning';
    return `<span class="badge ${cls}">${escapeHtml(decision)}</span>`;
}
export function renderChainBanner(chainOk, corruptSeq) {
    if (chainOk === null)
        return '';
    if (chainOk) {
        return '<div class="banner banner-ok">Hash chain verified: log is tamper-evident clean.</div>';
    }
    return `<div class="banner banner-bad">CHAIN BROKEN at seq ${escapeHtml(corruptSeq)} — entries from there on cannot be trusted.</div>`;
}
export function renderTraceRow(event) {
    return `
<tr data-seq="${event.seq}">
  <td class="num">${event.seq}</td>
  <td class="ts">${escapeHtml(event.ts)}</td>
  <td>${escapeHtml(event.tool)}</td>
  <td>${escapeHtml(event.action_type)}</td>
  <td>${renderDecisionBadge(event.decision)}</td>
  <td>${escapeHtml(event.decided_by)}</td>
  <td class="rule">${event.rule_id ? escapeHtml(event.rule_id) : '—'}</td>
  <td class="num">${event.latency_ms.toFixed(3)}</td>
  <td class="target">${escapeHtml(event.target)}${event.reload_detected ? ' <span class="badge badge-reload">reloaded</span>' : ''}</td>
</tr>`.trim();
}
export function renderTraceTable(events, chainOk, corruptSeq = null) {
    const banner = renderChainBanner(chainOk, corruptSeq);
    if (events.length === 0) {
        return `${banner}<p class="empty-state">No events match.</p>`;
    }
    const rows = events.map(renderTraceRow).join('\n');
    return `${banner}
<table class="trace">
  <thead>
    <tr><th>#</th><th>time</th><th>tool</th><th>action</th><th>decision</th>
        <th>decided by</th><th>rule</th><th>ms</th><th>target</th></tr>
  </thead>
  <tbody>
${rows}
  </tbody>
</table>`;
}
export function renderFeedItem(frame) {
    const payload = frame.payload;
    switch (frame.kind) {
        case 'decision':
        case 'warning': {
            const decision = String(payload.decision ?? '');
            return `<li data-frame="${frame.frame_id}">${renderDecisionBadge(decision)} ${escapeHtml(payload.tool ?? '')} <code>${escapeHtml(payload.target ?? '')}</code></li>`;
        }
        case 'approval_pending':
            return `<li data-frame="${frame.frame_id}"><span class="badge badge-ask">PENDING</span> ${escapeHtml(payload.tool ?? '')} <code>${escapeHtml(payload.target ?? '')}</code></li>`;
        case 'approval_resolved':
            return `<li data-frame="${frame.frame_id}"><span class="badge">${escapeHtml(String(payload.state ?? '').toUpperCase())}</span> ${escapeHtml(payload.tool ?? '')}</li>`;
        case 'policy_reloaded':
            return `<li data-frame="${frame.frame_id}"><span class="badge badge-reload">POLICY RELOADED</span> <code>${escapeHtml(String(payload.policy_version ?? '').slice(0, 12))}</code></li>`;
    }
}
export function renderConnection(connection) {
    const cls = connection === 'LIVE' ? 'conn-live' : 'conn-reconnecting';
    return `<span class="conn ${cls}">${connection}</span>`;
}
