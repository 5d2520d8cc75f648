import { ApiConflict, SessionApi } from "./api.js";
import { chartSvg } from "./charts.js";
import type { QueryPayload } from "./types.js";
import {
  FeedbackDraft, buildChartSeries, buildGridCells, buildTokenViews,
  draftCase, feedbackFromDraft, newDraft, toggleComponent,
} from "./viewmodel.js";

const PALETTE = ["#111827", "#ef4444", "#facc15", "#3b82f6", "#10b981",
  "#a855f7", "#fb923c", "#14b8a6", "#e11d48", "#64748b",
  "#f472b6", "#84cc16", "#7c3aed", "#f97316", "#06b6d4", "#eab308"];

/** Single-page driver: render the query, collect the draft, submit, repeat.
 * The UI is stateless beyond the current draft; every render starts from
 * server truth, so a reload reproduces the same view. */
export class AnnotatorApp {
  private draft: FeedbackDraft | null = null;
  private query: QueryPayload | null = null;

  constructor(private api: SessionApi, private root: HTMLElement,
              private sessionId: string) {}

  async refresh(): Promise<void> {
    this.query = await this.api.getQuery(this.sessionId);
    if (!this.query.done) {
      if (!this.draft || this.draft.iteration !== this.query.iteration) {
        this.draft = newDraft(this.query);
      }
    }
    await this.render();
  }

  private async render(): Promise<void> {
    const q = this.query;
    if (!q) return;
    this.root.replaceChildren();
    const header = document.createElement("div");
    header.className = "header";
    header.textContent = q.done
      ? `session ${q.session_id} finished (${q.status})`
      : `iteration ${q.iteration} of ${q.budget}` + (q.burn_in ? " (burn-in)" : "");
    this.root.appendChild(header);
    if (!q.done) {
      this.root.appendChild(this.renderInstance(q));
      this.root.appendChild(this.renderControls(q));
    }
    this.root.appendChild(await this.renderMetrics());
  }

  private renderInstance(q: QueryPayload): HTMLElement {
    const box = document.createElement("div");
    box.className = "instance";
    const payload = q.instance?.payload;
    if (payload?.kind === "image") {
      const table = document.createElement("table");
      table.className = "grid";
      const cells = buildGridCells(q);
      for (let r = 0; r < payload.height; r++) {
        const row = document.createElement("tr");
        for (let c = 0; c < payload.width; c++) {
          const cell = cells[r * payload.width + c];
          const td = document.createElement("td");
          td.style.background = PALETTE[cell.colorIndex % PALETTE.length];
          if (cell.tint) {
            td.classList.add(cell.tint);
            td.style.setProperty("--tint-opacity", cell.opacity.toFixed(3));
            td.classList.toggle("toggled",
              this.draft?.toggled.has(cell.component as number) ?? false);
            td.addEventListener("click", () => this.onToggle(cell.component as number));
          }
          row.appendChild(td);
        }
        table.appendChild(row);
      }
      box.appendChild(table);
    } else if (payload?.kind === "document") {
      const { tokens, staleComponents } = buildTokenViews(q);
      if (staleComponents.length > 0) {
        const warn = document.createElement("div");
        warn.className = "badge-warning";
        warn.textContent = `stale explanation words: ${staleComponents.join(", ")}`;
        box.appendChild(warn);
      }
      const doc = document.createElement("p");
      doc.className = "document";
      for (const tok of tokens) {
        const span = document.createElement("span");
        span.textContent = tok.word + " ";
        if (tok.tint) {
          span.classList.add(tok.tint);
          span.style.setProperty("--tint-opacity", tok.opacity.toFixed(3));
          span.classList.toggle("toggled",
            this.draft?.toggled.has(tok.component as number) ?? false);
          span.addEventListener("click", () => this.onToggle(tok.component as number));
        }
        doc.appendChild(span);
      }
      box.appendChild(doc);
    }
    const pred = document.createElement("div");
    pred.className = "prediction";
    pred.textContent =
      `prediction: ${q.class_names[q.predicted_label ?? 0] ?? q.predicted_label}`;
    box.appendChild(pred);
    return box;
  }

  private renderControls(q: QueryPayload): HTMLElement {
    const controls = document.createElement("div");
    controls.className = "controls";
    q.class_names.forEach((name, label) => {
      const btn = document.createElement("button");
      const agrees = label === q.predicted_label;
      btn.textContent = agrees ? `${name} (agree)` : name;
      btn.addEventListener("click", () => this.onSubmit(label));
      controls.appendChild(btn);
    });
    if (this.draft && this.draft.toggled.size > 0) {
      const note = document.createElement("span");
      note.className = "case-note";
      note.textContent = `case ${draftCase(this.draft, q)}: `
        + `${this.draft.toggled.size} component(s) flagged`;
      controls.appendChild(note);
    }
    return controls;
  }

  private async renderMetrics(): Promise<HTMLElement> {
    const panel = document.createElement("div");
    panel.className = "metrics";
    const metrics = await this.api.getMetrics(this.sessionId);
    for (const series of buildChartSeries(metrics.history)) {
      const holder = document.createElement("div");
      holder.innerHTML = chartSvg(series.name, [series]);
      panel.appendChild(holder);
    }
    return panel;
  }

  private onToggle(component: number): void {
    if (!this.draft || !this.query) return;
    this.draft = toggleComponent(this.draft, this.query, component);
    void this.render();
  }

  private async onSubmit(label: number): Promise<void> {
    if (!this.draft || !this.query) return;
    this.draft = { ...this.draft, label };
    try {
      await this.api.postFeedback(this.sessionId,
        feedbackFromDraft(this.draft, this.query));
      this.draft = null;
      await this.refresh();
    } catch (err) {
      if (err instanceof ApiConflict) {
        // someone answered first (or a retry landed): refetch current truth
        this.draft = null;
        await this.refresh();
        return;
      }
      // network failure: keep the draft so nothing typed is lost
      console.error(err);
    }
  }
}

export async function boot(root: HTMLElement): Promise<void> {
  const base = (document.querySelector("meta[name=api-base]") as HTMLMetaElement)
    ?.content ?? "http://127.0.0.1:8000";
  const api = new SessionApi(base);
  const params = new URLSearchParams(window.location.search);
  let sessionId = params.get("session");
  if (!sessionId) {
    const listing = await api.listSessions();
    sessionId = listing.sessions.find((s) => s.status === "running")?.session_id ?? null;
  }
  if (!sessionId) {
    root.textContent = "no running session; create one via POST /sessions";
    return;
  }
  const app = new AnnotatorApp(api, root, sessionId);
  await app.refresh();
}
