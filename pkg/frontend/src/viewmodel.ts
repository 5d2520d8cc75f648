import type { ExplanationView, MetricRecord, Payload, QueryPayload } from "./types.js";

/** Pure view-model builders; the DOM layer renders these verbatim. */

export interface CellView {
  index: number;
  colorIndex: number;
  component: number | null; // explanation component tinting this cell
  tint: "support" | "oppose" | null;
  opacity: number;
}

export interface TokenView {
  position: number;
  tokenId: number;
  word: string;
  component: number | null;
  tint: "support" | "oppose" | null;
  opacity: number;
}

export interface FeedbackDraft {
  iteration: number;
  label: number | null;
  toggled: Set<number>;
  submitted: boolean;
}

const tintOf = (weight: number): "support" | "oppose" =>
  weight > 0 ? "support" : "oppose";

function weightByComponent(expl: ExplanationView): Map<number, number> {
  return new Map(expl.components.map(([j, w]) => [j, w]));
}

function maxAbsWeight(expl: ExplanationView): number {
  return expl.components.reduce((m, [, w]) => Math.max(m, Math.abs(w)), 0);
}

/** Overlay for image payloads: exactly the explanation's components are
 * tinted, green when the weight supports the predicted class, red when it
 * contradicts it, opacity proportional to |w| / max|w|. During burn-in the
 * overlay is suppressed entirely. */
export function buildGridCells(query: QueryPayload): CellView[] {
  const payload = query.instance?.payload;
  if (!payload || payload.kind !== "image") {
    throw new Error("not an image query");
  }
  const cells: CellView[] = [];
  const flat: number[] = [];
  for (const row of payload.grid) flat.push(...row);
  const overlay = new Map<number, { component: number; weight: number }>();
  if (!query.burn_in && query.explanation && query.component_cells) {
    const weights = weightByComponent(query.explanation);
    for (const [componentStr, cellIdxs] of Object.entries(query.component_cells)) {
      const component = Number(componentStr);
      const weight = weights.get(component);
      if (weight === undefined) continue;
      for (const idx of cellIdxs) overlay.set(idx, { component, weight });
    }
  }
  const maxAbs = query.explanation ? maxAbsWeight(query.explanation) : 0;
  flat.forEach((colorIndex, index) => {
    const hit = overlay.get(index);
    cells.push({
      index,
      colorIndex,
      component: hit ? hit.component : null,
      tint: hit ? tintOf(hit.weight) : null,
      opacity: hit && maxAbs > 0 ? Math.abs(hit.weight) / maxAbs : 0,
    });
  });
  return cells;
}

/** Token list for document payloads: the highlighted token set equals the
 * explanation indices present in the document; a word listed by a stale
 * explanation but absent from the document is reported, not rendered. */
export function buildTokenViews(query: QueryPayload): {
  tokens: TokenView[];
  staleComponents: number[];
} {
  const payload = query.instance?.payload;
  if (!payload || payload.kind !== "document") {
    throw new Error("not a document query");
  }
  const weights = query.burn_in || !query.explanation
    ? new Map<number, number>()
    : weightByComponent(query.explanation);
  const maxAbs = query.explanation ? maxAbsWeight(query.explanation) : 0;
  const present = new Set(payload.tokens);
  const tokens = payload.tokens.map((tokenId, position) => {
    const weight = weights.get(tokenId);
    return {
      position,
      tokenId,
      word: payload.words?.[position] ?? String(tokenId),
      component: weight === undefined ? null : tokenId,
      tint: weight === undefined ? null : tintOf(weight),
      opacity: weight === undefined || maxAbs === 0 ? 0 : Math.abs(weight) / maxAbs,
    };
  });
  const staleComponents = [...weights.keys()].filter((j) => !present.has(j)).sort((a, b) => a - b);
  return { tokens, staleComponents };
}

export function newDraft(query: QueryPayload): FeedbackDraft {
  if (query.done || query.iteration === undefined) {
    throw new Error("session is complete");
  }
  return { iteration: query.iteration, label: null, toggled: new Set(), submitted: false };
}

/** Toggling is click-on-overlay only: components outside the explanation
 * cannot be flagged, and burn-in queries take no toggles at all. */
export function toggleComponent(draft: FeedbackDraft, query: QueryPayload,
                                component: number): FeedbackDraft {
  if (query.burn_in) return draft;
  const allowed = new Set((query.explanation?.components ?? []).map(([j]) => j));
  if (!allowed.has(component)) return draft;
  const toggled = new Set(draft.toggled);
  if (toggled.has(component)) toggled.delete(component);
  else toggled.add(component);
  return { ...draft, toggled };
}

export function draftCase(draft: FeedbackDraft, query: QueryPayload): 1 | 2 | 3 {
  if (draft.label !== null && draft.label !== query.predicted_label) return 2;
  return draft.toggled.size > 0 ? 3 : 1;
}

export function feedbackFromDraft(draft: FeedbackDraft, query: QueryPayload): {
  iteration: number;
  label: number;
  flagged: number[];
} {
  const label = draft.label ?? query.predicted_label;
  if (label === undefined || label === null) {
    throw new Error("choose a label before submitting");
  }
  // a relabeled query carries no explanation correction
  const flagged = label === query.predicted_label
    ? [...draft.toggled].sort((a, b) => a - b)
    : [];
  return { iteration: draft.iteration, label, flagged };
}

// -- metric charts -------------------------------------------------------

export interface Series {
  name: string;
  points: { t: number; value: number }[];
}

export function runningMean(values: number[]): number[] {
  const out: number[] = [];
  let sum = 0;
  values.forEach((v, i) => {
    sum += v;
    out.push(sum / (i + 1));
  });
  return out;
}

/** Chart series from the metric history; the coefficient panel is present
 * only when the learner reports the decomposition (linear models). */
export function buildChartSeries(history: MetricRecord[]): Series[] {
  const series: Series[] = [
    { name: "predictive", points: history.map((r) => ({ t: r.t, value: r.predictive })) },
    { name: "instantaneous explanation F1",
      points: history.map((r) => ({ t: r.t, value: r.expl_f1_query })) },
    { name: "cumulative explanation F1",
      points: history.map((r) => ({ t: r.t, value: r.expl_f1_cum })) },
  ];
  const testPoints = history
    .filter((r) => r.expl_f1_test !== null)
    .map((r) => ({ t: r.t, value: r.expl_f1_test as number }));
  if (testPoints.length > 0) {
    series.push({ name: "test-set explanation F1", points: testPoints });
  }
  const alphaPoints = history.filter((r) => r.alpha0 !== null);
  if (alphaPoints.length > 0) {
    series.push({ name: "alpha0", points: alphaPoints.map((r) => ({ t: r.t, value: r.alpha0 as number })) });
    series.push({ name: "alpha1", points: alphaPoints.map((r) => ({ t: r.t, value: r.alpha1 as number })) });
  }
  return series;
}

export function hasCoefficientPanel(history: MetricRecord[]): boolean {
  return history.some((r) => r.alpha0 !== null);
}

/** Cross-check the server's cumulative series against a client-side
 * recomputation (used by the metrics panel self-test). */
export function cumulativeConsistent(history: MetricRecord[], tol = 1e-9): boolean {
  const recomputed = runningMean(history.map((r) => r.expl_f1_query));
  return history.every((r, i) => Math.abs(r.expl_f1_cum - recomputed[i]) <= tol);
}
