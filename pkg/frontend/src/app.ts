/**
 * Browser entry point: wires the store, the control API, and the event
 * stream to the DOM.
 *
 * The token arrives once as a ?token= query parameter (the proxy prints
 * the URL at startup), moves into sessionStorage, and is stripped from
 * the address bar. All approve/reject activity starts from an explicit
 * click on a card button; conflict responses (someone else resolved it
 * first) just refresh the queue.
 */

import { ControlApi } from './api.js';
import { DashboardStore } from './store.js';
import { applyTraceFilter, decisionCounts, uniqueTools, DECISION_OPTIONS } from './filters.js';
import {
  renderApprovalQueue,
  renderConnection,
  renderFeedItem,
  renderTraceTable,
} from './render.js';
import type { StreamFrame, TraceFilterForm } from './app_types.js';
import type { TraceFilter } from './filters.js';

function resolveToken(): string | null {
  const url = new URL(window.location.href);
  const fromQuery = url.searchParams.get('token');
  if (fromQuery) {
    sessionStorage.setItem('agentwall_token', fromQuery);
    url.searchParams.delete('token');
    history.replaceState(null, '', url.toString());
  }
  return sessionStorage.getItem('agentwall_token');
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class DashboardApp {
  private store = new DashboardStore();
  private filter: TraceFilter = {};
  private source: EventSource | null = null;
  private notified = new Set<string>();

  constructor(private api: ControlApi) {}

  async start(): Promise<void> {
    this.store.subscribe(() => this.render());
    el('approvals').addEventListener('click', (event) => this.onQueueClick(event));
    el('filter-form').addEventListener('change', () => this.onFilterChange());
    el('session-select').addEventListener('change', () => this.onSessionChange());
    this.store.setPending(await this.api.pendingApprovals());
    await this.refreshSessions();
    this.connect();
  }

  private connect(): void {
    this.source = new EventSource(this.api.streamUrl());
    this.source.onopen = () => this.store.setConnection('LIVE');
    this.source.onerror = () => this.store.setConnection('RECONNECTING');
    this.source.onmessage = (message) => {
      const frame = JSON.parse(message.data) as StreamFrame;
      if (this.store.applyFrame(frame) && frame.kind === 'approval_pending') {
        this.notifyPending(frame);
      }
    };
  }

  private notifyPending(frame: StreamFrame): void {
    const id = String((frame.payload as { id?: string }).id ?? '');
    if (!id || this.notified.has(id)) return;
    this.notified.add(id);
    if ('Notification' in window && Notification.permission === 'granted') {
      const payload = frame.payload as { tool?: string; target?: string };
      new Notification('AgentWall: approval needed', {
        body: `${payload.tool ?? ''}: ${payload.target ?? ''}`,
      });
    }
  }

  private async onQueueClick(event: Event): Promise<void> {
    const button = (event.target as HTMLElement).closest('button[data-action]');
    if (!button) return;
    const id = button.getAttribute('data-id') ?? '';
    const action = button.getAttribute('data-action') as 'approve' | 'reject';
    button.setAttribute('disabled', 'disabled');
    const outcome = await this.api.decide(id, action);
    if (!outcome.ok && !outcome.conflict) {
      // network/server trouble: mark stale, leave a retry affordance
      button.removeAttribute('disabled');
      button.closest('.approval-card')?.classList.add('stale');
      return;
    }
    // success or resolved-elsewhere: the registry is authoritative either way
    this.store.setPending(await this.api.pendingApprovals());
  }

  private async refreshSessions(): Promise<void> {
    const sessions = await this.api.sessions();
    const select = el<HTMLSelectElement>('session-select');
    const previous = select.value;
    select.innerHTML =
      '<option value="">live feed only</option>' +
      sessions
        .map(
          (s) =>
            `<option value="${s.session_id}">${s.session_id} (${s.events} events, ${s.runtime})</option>`,
        )
        .join('');
    if (previous) select.value = previous;
  }

  private async onSessionChange(): Promise<void> {
    const select = el<HTMLSelectElement>('session-select');
    if (!select.value) {
      this.store.selectSession(null, [], null);
      return;
    }
    const detail = await this.api.sessionEvents(select.value);
    this.store.selectSession(detail.session_id, detail.events, detail.chain_ok);
  }

  private onFilterChange(): void {
    const form = el<HTMLFormElement>('filter-form') as unknown as TraceFilterForm;
    this.filter = {
      decision: form.decision.value || undefined,
      tool: form.tool.value || undefined,
      since: form.since.value || undefined,
      until: form.until.value || undefined,
    };
    this.render();
  }

  private render(): void {
    const state = this.store.current;
    el('connection').innerHTML = renderConnection(state.connection);
    el('pending-count').textContent = String(state.pending.length);
    el('approvals').innerHTML = renderApprovalQueue(state.pending, Date.now() / 1000);

    const feed = el<HTMLUListElement>('feed');
    feed.innerHTML = state.feed.slice(-40).map(renderFeedItem).reverse().join('\n');

    const filtered = applyTraceFilter(state.sessionEvents, this.filter);
    el('trace').innerHTML = state.selectedSession
      ? renderTraceTable(filtered, state.chainOk)
      : '<p class="empty-state">Select a session to inspect its trail.</p>';
    el('trace-counts').textContent = state.selectedSession
      ? Object.entries(decisionCounts(filtered))
          .map(([k, v]) => `${k}: ${v}`)
          .join('  ')
      : '';

    const toolSelect = el<HTMLSelectElement>('filter-tool');
    const tools = uniqueTools(state.sessionEvents);
    if (toolSelect.options.length !== tools.length + 1) {
      const previous = toolSelect.value;
      toolSelect.innerHTML =
        '<option value="">any tool</option>' +
        tools.map((t) => `<option value="${t}">${t}</option>`).join('');
      toolSelect.value = previous;
    }
  }
}

async function boot(): Promise<void> {
  const token = resolveToken();
  const status = el('connection');
  if (!token) {
    status.innerHTML =
      '<span class="conn conn-reconnecting">NO TOKEN</span> open the dashboard via the URL the proxy prints';
    return;
  }
  const decisions = el<HTMLSelectElement>('filter-decision');
  decisions.innerHTML =
    '<option value="">any decision</option>' +
    DECISION_OPTIONS.map((d) => `<option value="${d}">${d}</option>`).join('');
  if ('Notification' in window && Notification.permission === 'default') {
    void Notification.requestPermission();
  }
  const app = new DashboardApp(new ControlApi('', token));
  await app.start();
}

void boot();
