/**
 * Triage dashboard: an anomaly review queue, a context chart for the
 * selected record, and a risk-factor control with a server-side preview.
 *
 * The app holds no detection state of its own. Every view is a function
 * of API responses, so clearing storage and reloading reproduces the
 * identical page, and each operator mutation maps to exactly one API
 * call (POST /feedback or PUT /config/risk-factor).
 */

import { ApiError, NetworkError, TriageApi } from "./api.js";
import { describeContext, drawContextChart } from "./chart.js";
import {
  findRow,
  shownVerdict,
  tierCounts,
  toRows,
  verdictLabel,
  type RowState,
} from "./queue.js";
import {
  atCommitted,
  buildGrid,
  formatQuantile,
  formatRisk,
  gridIndexOf,
  previewFor,
  selectedQuantile,
  type RiskPanelState,
} from "./risk.js";
import type { AnomalyContext, AnomalyRecord, Verdict } from "./types.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function messageOf(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

export class TriageApp {
  readonly root: HTMLElement;
  readonly api: TriageApi;

  rows: RowState[] = [];
  showLow = false;
  range: { from: string; to: string } = { from: "", to: "" };
  queueError: string | null = null;
  /** Connectivity banner text; null hides the banner. */
  bannerMessage: string | null = null;

  selectedId: string | null = null;
  context: AnomalyContext | null = null;
  contextError: string | null = null;
  contextLoading = false;

  risk: RiskPanelState | null = null;
  riskError: string | null = null;

  constructor(root: HTMLElement, api: TriageApi) {
    this.root = root;
    this.api = api;
    this.renderShell();
    this.bindEvents();
  }

  /** Initial load; everything after this is event-driven. */
  async start(): Promise<void> {
    await this.refresh();
  }

  async refresh(): Promise<void> {
    await Promise.all([this.loadQueue(), this.loadRiskPanel()]);
  }

  // -- queue --------------------------------------------------------------

  async loadQueue(): Promise<void> {
    try {
      const listing = await this.api.anomalies({
        tier: this.showLow ? "all" : "high",
        from: this.range.from || undefined,
        to: this.range.to || undefined,
      });
      this.rows = toRows(listing.records);
      this.queueError = null;
      this.bannerMessage = null;
    } catch (err) {
      if (err instanceof NetworkError) {
        this.queueError = "the anomaly queue could not be loaded";
        this.bannerMessage = messageOf(err);
      } else if (err instanceof ApiError) {
        this.queueError = err.message;
      } else {
        throw err;
      }
    }
    this.renderBanner();
    this.renderQueue();
  }

  applyRange(): void {
    const from = this.input("from").value.trim();
    const to = this.input("to").value.trim();
    this.range = { from, to };
    void this.loadQueue();
  }

  async setShowLow(show: boolean): Promise<void> {
    this.showLow = show;
    await this.loadQueue();
  }

  // -- verdicts -----------------------------------------------------------

  /**
   * Optimistically mark the row, then reconcile with the server response.
   * A conflict reverts to the verdict the service has on record; a
   * transport failure parks the pick behind a retry affordance.
   */
  async submitVerdict(id: string, verdict: Verdict): Promise<void> {
    const row = findRow(this.rows, id);
    if (!row || row.phase === "submitting") return;
    row.phase = "submitting";
    row.pendingVerdict = verdict;
    row.notice = null;
    this.renderRow(row);
    try {
      const committed = await this.api.submitVerdict(id, verdict);
      row.record = committed;
      row.phase = "idle";
      row.pendingVerdict = null;
    } catch (err) {
      if (err instanceof ApiError && err.code === "VerdictConflict") {
        row.phase = "conflict";
        row.pendingVerdict = null;
        row.notice = err.message;
        const current = await this.fetchRecord(id);
        if (current) {
          row.record = current;
          row.notice = `kept "${verdictLabel(current.verdict)}": ${err.message}`;
        }
      } else if (err instanceof NetworkError) {
        row.phase = "failed";
        row.notice = `"${verdictLabel(verdict)}" was not submitted: ${err.message}`;
      } else if (err instanceof ApiError) {
        row.phase = "idle";
        row.pendingVerdict = null;
        row.notice = err.message;
      } else {
        row.phase = "idle";
        row.pendingVerdict = null;
        throw err;
      }
    }
    this.renderRow(row);
    if (this.selectedId === id && this.context) {
      this.context.record = row.record;
      this.renderContext();
    }
  }

  retryVerdict(id: string): void {
    const row = findRow(this.rows, id);
    if (row && row.phase === "failed" && row.pendingVerdict) {
      row.phase = "idle";
      void this.submitVerdict(id, row.pendingVerdict);
    }
  }

  dismissNotice(id: string): void {
    const row = findRow(this.rows, id);
    if (!row || row.phase === "submitting") return;
    row.phase = "idle";
    row.pendingVerdict = null;
    row.notice = null;
    this.renderRow(row);
  }

  private async fetchRecord(id: string): Promise<AnomalyRecord | null> {
    try {
      return (await this.api.context(id)).record;
    } catch {
      return null;
    }
  }

  // -- context ------------------------------------------------------------

  async openContext(id: string): Promise<void> {
    this.selectedId = id;
    this.context = null;
    this.contextError = null;
    this.contextLoading = true;
    this.renderQueue();
    this.renderContext();
    try {
      this.context = await this.api.context(id);
    } catch (err) {
      this.contextError = messageOf(err);
    }
    this.contextLoading = false;
    this.renderContext();
  }

  // -- risk factor --------------------------------------------------------

  async loadRiskPanel(): Promise<void> {
    try {
      const committed = await this.api.riskFactor();
      const grid = buildGrid(committed.quantile);
      const windows = await this.api.funnelWindows();
      const latest = windows.length > 0 ? windows[windows.length - 1] : null;
      const rows = latest === null ? null : await this.api.sweep(latest, grid);
      this.risk = {
        committed,
        grid,
        selected: gridIndexOf(grid, committed.quantile),
        rows,
        window: latest,
        notice: null,
        applying: false,
      };
      this.riskError = null;
    } catch (err) {
      this.risk = null;
      this.riskError = messageOf(err);
    }
    this.renderRisk();
  }

  selectRiskIndex(index: number): void {
    if (!this.risk) return;
    const clamped = Math.min(Math.max(Math.round(index), 0), this.risk.grid.length - 1);
    this.risk.selected = clamped;
    this.risk.notice = null;
    this.renderRisk();
  }

  /**
   * PUT the selected quantile. Runs only on the explicit apply click and
   * never while the slider sits on the committed value. Rejection shows
   * the server's message and snaps the control back to the committed q.
   */
  async applyRisk(): Promise<void> {
    const risk = this.risk;
    if (!risk || risk.applying || atCommitted(risk)) return;
    risk.applying = true;
    risk.notice = null;
    this.renderRisk();
    try {
      const updated = await this.api.setRiskFactor({ quantile: selectedQuantile(risk) });
      risk.committed = { risk_q: updated.risk_q, quantile: updated.quantile };
      risk.selected = gridIndexOf(risk.grid, updated.quantile);
      risk.notice = `applied quantile ${formatQuantile(updated.quantile)} `
        + `(risk ${formatRisk(updated.risk_q)}, was ${formatRisk(updated.previous)})`;
    } catch (err) {
      risk.selected = gridIndexOf(risk.grid, risk.committed.quantile);
      risk.notice = `not applied: ${messageOf(err)}`;
    }
    risk.applying = false;
    this.renderRisk();
  }

  // -- shell & events -------------------------------------------------------

  private renderShell(): void {
    this.root.innerHTML = `
      <div class="layout">
        <header class="topbar">
          <div>
            <h1>Anomaly Triage</h1>
            <p class="subtitle">review queue and risk-factor control</p>
          </div>
        </header>
        <div class="banner" data-role="banner" hidden>
          <span data-role="banner-text"></span>
          <button class="btn" data-action="retry-load">Retry</button>
        </div>
        <main class="columns">
          <section class="pane queue-pane">
            <div class="queue-controls">
              <label class="toggle">
                <input type="checkbox" data-role="toggle-low">
                show low tier
              </label>
              <input class="range-input" data-role="from" placeholder="from (RFC3339)" spellcheck="false">
              <input class="range-input" data-role="to" placeholder="to (RFC3339)" spellcheck="false">
              <button class="btn" data-action="apply-range">Filter</button>
            </div>
            <div class="queue-summary" data-role="queue-summary"></div>
            <div class="queue-list" data-role="queue-list"></div>
          </section>
          <section class="pane detail-pane">
            <div class="card context-card" data-role="context-card"></div>
            <div class="card risk-card" data-role="risk-card"></div>
          </section>
        </main>
      </div>
    `;
    this.renderQueue();
    this.renderContext();
    this.renderRisk();
  }

  private bindEvents(): void {
    this.root.addEventListener("click", (event) => {
      const el = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
      if (!el || el.hasAttribute("disabled")) return;
      const id = el.dataset["id"] ?? "";
      switch (el.dataset["action"]) {
        case "retry-load":
          void this.refresh();
          break;
        case "apply-range":
          this.applyRange();
          break;
        case "open-context":
          void this.openContext(id);
          break;
        case "verdict":
          void this.submitVerdict(id, el.dataset["verdict"] as Verdict);
          break;
        case "retry-verdict":
          this.retryVerdict(id);
          break;
        case "dismiss-notice":
          this.dismissNotice(id);
          break;
        case "risk-apply":
          void this.applyRisk();
          break;
        case "risk-retry":
          void this.loadRiskPanel();
          break;
        case "context-retry":
          if (this.selectedId) void this.openContext(this.selectedId);
          break;
      }
    });
    this.root.addEventListener("change", (event) => {
      const el = event.target as HTMLInputElement;
      if (el.dataset["role"] === "toggle-low") void this.setShowLow(el.checked);
    });
    this.root.addEventListener("input", (event) => {
      const el = event.target as HTMLInputElement;
      if (el.dataset["role"] === "risk-slider") this.selectRiskIndex(Number(el.value));
    });
  }

  // -- rendering ------------------------------------------------------------

  private part<T extends HTMLElement>(role: string): T {
    const el = this.root.querySelector<T>(`[data-role="${role}"]`);
    if (!el) throw new Error(`missing shell element ${role}`);
    return el;
  }

  private input(role: string): HTMLInputElement {
    return this.part<HTMLInputElement>(role);
  }

  private renderBanner(): void {
    const banner = this.part<HTMLElement>("banner");
    if (this.bannerMessage === null) {
      banner.hidden = true;
      return;
    }
    banner.hidden = false;
    this.part<HTMLElement>("banner-text").textContent = this.bannerMessage;
  }

  private renderQueue(): void {
    const counts = tierCounts(this.rows);
    const summary = this.part<HTMLElement>("queue-summary");
    if (this.queueError !== null) {
      summary.textContent = "";
    } else if (this.showLow) {
      summary.textContent =
        `${this.rows.length} anomalies: ${counts.high} high, ${counts.low} low`;
    } else {
      summary.textContent = `${counts.high} high-tier anomalies (low tier hidden)`;
    }

    const list = this.part<HTMLElement>("queue-list");
    if (this.queueError !== null) {
      list.innerHTML = `
        <div class="load-error">
          <p>${escapeHtml(this.queueError)}</p>
          <button class="btn" data-action="retry-load">Retry</button>
        </div>
      `;
      return;
    }
    if (this.rows.length === 0) {
      list.innerHTML = `<div class="empty-state">No anomalies in range</div>`;
      return;
    }
    list.innerHTML = this.rows.map((row) => this.rowHtml(row)).join("");
  }

  private rowHtml(row: RowState): string {
    const rec = row.record;
    const verdict = shownVerdict(row);
    const selected = this.selectedId === rec.id ? " selected" : "";
    const busy = row.phase === "submitting";
    return `
      <div class="queue-row${selected}" data-id="${escapeHtml(rec.id)}" data-tier="${rec.tier}">
        <button class="row-main" data-action="open-context" data-id="${escapeHtml(rec.id)}">
          <span class="badge tier-${rec.tier}">${rec.tier}</span>
          <span class="metric" title="${escapeHtml(seriesLabel(rec))}">${escapeHtml(seriesLabel(rec))}</span>
          <span class="ts">${escapeHtml(rec.timestamp)}</span>
          <span class="num">score ${rec.score.toFixed(2)}</span>
          <span class="num confidence">conf ${(rec.confidence * 100).toFixed(2)}%</span>
          <span class="badge verdict verdict-${verdict}" data-role="verdict">${verdictLabel(verdict)}</span>
        </button>
        <div class="row-actions">
          <button class="btn verdict-btn" data-action="verdict" data-id="${escapeHtml(rec.id)}"
                  data-verdict="confirmed"${busy ? " disabled" : ""}>Confirm</button>
          <button class="btn verdict-btn" data-action="verdict" data-id="${escapeHtml(rec.id)}"
                  data-verdict="false_flag"${busy ? " disabled" : ""}>False flag</button>
        </div>
        ${this.rowNoticeHtml(row)}
      </div>
    `;
  }

  private rowNoticeHtml(row: RowState): string {
    if (row.notice === null) return "";
    const id = escapeHtml(row.record.id);
    const retry = row.phase === "failed"
      ? `<button class="btn" data-action="retry-verdict" data-id="${id}">Retry</button>`
      : "";
    return `
      <div class="row-notice phase-${row.phase}">
        <span>${escapeHtml(row.notice)}</span>
        ${retry}
        <button class="btn ghost" data-action="dismiss-notice" data-id="${id}">Dismiss</button>
      </div>
    `;
  }

  private renderRow(row: RowState): void {
    const el = this.root.querySelector(`.queue-row[data-id="${cssEscape(row.record.id)}"]`);
    if (el) el.outerHTML = this.rowHtml(row);
    else this.renderQueue();
  }

  private renderContext(): void {
    const card = this.part<HTMLElement>("context-card");
    if (this.selectedId === null) {
      card.innerHTML = `
        <h2>Context</h2>
        <p class="hint">Select an anomaly to see its series, forecast band, and threshold.</p>
      `;
      return;
    }
    if (this.contextLoading) {
      card.innerHTML = `<h2>Context</h2><p class="hint">Loading context...</p>`;
      return;
    }
    if (this.contextError !== null || this.context === null) {
      card.innerHTML = `
        <h2>Context</h2>
        <div class="load-error">
          <p>${escapeHtml(this.contextError ?? "context unavailable")}</p>
          <button class="btn" data-action="context-retry">Retry</button>
        </div>
      `;
      return;
    }
    const data = this.context;
    const rec = data.record;
    card.innerHTML = `
      <h2>Context</h2>
      <div class="context-head">
        <span class="metric">${escapeHtml(seriesLabel(rec))}</span>
        <span class="badge tier-${rec.tier}">${rec.tier}</span>
        <span class="badge verdict verdict-${rec.verdict}">${verdictLabel(rec.verdict)}</span>
      </div>
      <canvas class="context-chart" data-role="context-chart" width="640" height="240"></canvas>
      <p class="chart-summary" data-role="chart-summary">${escapeHtml(describeContext(data))}</p>
      <dl class="context-facts">
        <div><dt>observed</dt><dd>${rec.actual.toFixed(3)}</dd></div>
        <div><dt>forecast mu</dt><dd>${rec.mu.toFixed(3)}</dd></div>
        <div><dt>score</dt><dd>${rec.score.toFixed(3)} (${escapeHtml(rec.side)})</dd></div>
        <div><dt>z_q at detection</dt><dd>${rec.z_q_at_detection.toFixed(3)}</dd></div>
        <div><dt>window</dt><dd>${escapeHtml(rec.window_id)}</dd></div>
      </dl>
      <div class="legend">
        <span class="key key-value">observed</span>
        <span class="key key-mu">forecast mu</span>
        <span class="key key-band">band (mu &plusmn; ${data.band_z.toFixed(2)} sigma)</span>
        <span class="key key-zq">threshold (mu &plusmn; z_q sigma)</span>
      </div>
    `;
    const canvas = card.querySelector<HTMLCanvasElement>("[data-role=context-chart]");
    if (canvas) drawContextChart(canvas, data);
  }

  private renderRisk(): void {
    const card = this.part<HTMLElement>("risk-card");
    if (this.riskError !== null) {
      card.innerHTML = `
        <h2>Risk factor</h2>
        <div class="load-error">
          <p>${escapeHtml(this.riskError)}</p>
          <button class="btn" data-action="risk-retry">Retry</button>
        </div>
      `;
      return;
    }
    const risk = this.risk;
    if (!risk) {
      card.innerHTML = `<h2>Risk factor</h2><p class="hint">Loading...</p>`;
      return;
    }
    const unchanged = atCommitted(risk);
    const selected = selectedQuantile(risk);
    const preview = previewFor(risk, risk.selected);
    const current = previewFor(risk, gridIndexOf(risk.grid, risk.committed.quantile));
    let note: string;
    if (unchanged) {
      note = "no change";
    } else if (preview) {
      note = `projected high-tier count ${preview.high_count}`
        + (current ? ` (now ${current.high_count})` : "");
    } else {
      note = "no preview for this point";
    }
    card.innerHTML = `
      <h2>Risk factor</h2>
      <p class="risk-committed">
        committed quantile <strong data-role="risk-committed-q">${formatQuantile(risk.committed.quantile)}</strong>
        <span class="muted">(risk ${formatRisk(risk.committed.risk_q)})</span>
      </p>
      <input type="range" class="risk-slider" data-role="risk-slider"
             min="0" max="${risk.grid.length - 1}" step="1" value="${risk.selected}"
             ${risk.applying ? "disabled" : ""}>
      <p class="risk-selected">
        selected <strong data-role="risk-selected-q">${formatQuantile(selected)}</strong>
      </p>
      ${this.riskPreviewHtml(risk)}
      <div class="risk-apply-row">
        <span class="risk-note" data-role="risk-note">${escapeHtml(note)}</span>
        <button class="btn primary" data-role="risk-apply" data-action="risk-apply"
                ${unchanged || risk.applying ? "disabled" : ""}>
          ${risk.applying ? "Applying..." : "Apply"}
        </button>
      </div>
      ${risk.notice === null ? "" : `<p class="risk-notice" data-role="risk-notice">${escapeHtml(risk.notice)}</p>`}
    `;
  }

  private riskPreviewHtml(risk: RiskPanelState): string {
    if (risk.rows === null) {
      return `<p class="hint">No committed window yet; preview unavailable.</p>`;
    }
    const maxCount = Math.max(1, ...risk.rows.map((r) => r.high_count));
    const committedIdx = gridIndexOf(risk.grid, risk.committed.quantile);
    const rows = risk.grid.map((q, i) => {
      const row = previewFor(risk, i);
      const count = row ? row.high_count : 0;
      const width = ((count / maxCount) * 100).toFixed(1);
      const marks = [
        i === risk.selected ? "selected" : "",
        i === committedIdx ? "committed" : "",
      ].filter(Boolean).join(" ");
      return `
        <div class="preview-row ${marks}" data-q="${q}">
          <span class="preview-q">${formatQuantile(q)}</span>
          <span class="preview-bar"><span class="preview-fill" style="width:${width}%"></span></span>
          <span class="preview-count">${row ? count : "?"}</span>
        </div>
      `;
    }).join("");
    const windowNote = risk.window === null ? "" :
      `<p class="muted preview-window">high-tier counts from window ${escapeHtml(risk.window)}</p>`;
    return `<div class="risk-preview" data-role="risk-preview">${rows}</div>${windowNote}`;
  }
}

function seriesLabel(rec: AnomalyRecord): string {
  return `${rec.key.metric_name} / ${rec.key.dimension_value}`;
}

// CSS.escape is not everywhere; ids are hex digests so quoting is enough.
function cssEscape(value: string): string {
  return value.replace(/["\\]/g, "\\$&");
}

/** Entry point used by index.html. */
export function mountTriageApp(root: HTMLElement, baseUrl = ""): TriageApp {
  const app = new TriageApp(root, new TriageApi(baseUrl));
  void app.start();
  return app;
}
