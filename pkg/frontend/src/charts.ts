import type { Series } from "./viewmodel.js";

/** Dependency-free SVG line charts for the metric panels. */

const COLORS = ["#2563eb", "#16a34a", "#dc2626", "#9333ea", "#d97706", "#0891b2"];

export interface ChartSpec {
  width: number;
  height: number;
  pad: number;
}

const DEFAULT_SPEC: ChartSpec = { width: 420, height: 180, pad: 28 };

export function polylinePoints(series: Series, tMax: number, vMin: number,
                               vMax: number, spec: ChartSpec = DEFAULT_SPEC): string {
  const span = Math.max(vMax - vMin, 1e-9);
  return series.points
    .map(({ t, value }) => {
      const x = spec.pad + (t / Math.max(tMax, 1)) * (spec.width - 2 * spec.pad);
      const y = spec.height - spec.pad
        - ((value - vMin) / span) * (spec.height - 2 * spec.pad);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}

export function chartSvg(title: string, series: Series[],
                         spec: ChartSpec = DEFAULT_SPEC): string {
  const allValues = series.flatMap((s) => s.points.map((p) => p.value));
  const allT = series.flatMap((s) => s.points.map((p) => p.t));
  if (allValues.length === 0) return "";
  const vMin = Math.min(0, ...allValues);
  const vMax = Math.max(1, ...allValues);
  const tMax = Math.max(...allT);
  const lines = series.map((s, i) =>
    `<polyline fill="none" stroke="${COLORS[i % COLORS.length]}" stroke-width="1.5" `
    + `points="${polylinePoints(s, tMax, vMin, vMax, spec)}"/>`);
  const legend = series.map((s, i) =>
    `<tspan fill="${COLORS[i % COLORS.length]}">${s.name}</tspan>`).join("  ");
  return `<svg viewBox="0 0 ${spec.width} ${spec.height}" class="chart">`
    + `<text x="${spec.pad}" y="14" class="chart-title">${title}</text>`
    + `<text x="${spec.pad}" y="${spec.height - 6}" class="chart-legend">${legend}</text>`
    + `<line x1="${spec.pad}" y1="${spec.height - spec.pad}" x2="${spec.width - spec.pad}" `
    + `y2="${spec.height - spec.pad}" stroke="#888"/>`
    + lines.join("")
    + `</svg>`;
}
