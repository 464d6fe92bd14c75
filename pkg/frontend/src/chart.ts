/**
 * Context chart: one pane showing the raw series, the forecast mean, the
 * quantile band (mu +/- band_z * sigma), and the tail threshold drawn as
 * the mu +/- z_q * sigma envelope.
 *
 * Geometry is split from drawing so it can be tested without a canvas
 * implementation; drawing targets a minimal 2D-context interface.
 */

import type { AnomalyContext, ContextPoint } from "./types.js";

export interface Extent {
  min: number;
  max: number;
}

export interface Margins {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const CHART_MARGINS: Margins = { top: 12, right: 14, bottom: 26, left: 52 };

/** mu + sign * z * sigma per point, null where the band is missing. */
export function envelope(
  points: ContextPoint[],
  z: number,
  sign: 1 | -1,
): Array<number | null> {
  return points.map((p) => (p.mu === null || p.sigma === null ? null : p.mu + sign * z * p.sigma));
}

/**
 * Y extent covering the values, the band, and the z_q envelope, padded so
 * nothing sits on the frame edge. Degenerate spans get a unit of headroom.
 */
export function valueExtent(data: AnomalyContext): Extent {
  let min = Infinity;
  let max = -Infinity;
  const take = (v: number | null) => {
    if (v === null || !Number.isFinite(v)) return;
    if (v < min) min = v;
    if (v > max) max = v;
  };
  const z = Math.max(data.band_z, data.z_q);
  for (const p of data.points) {
    take(p.value);
    if (p.mu !== null && p.sigma !== null) {
      take(p.mu - z * p.sigma);
      take(p.mu + z * p.sigma);
    }
  }
  if (min === Infinity) {
    min = 0;
    max = 1;
  }
  const pad = (max - min) * 0.08 || 1.0;
  return { min: min - pad, max: max + pad };
}

/** Half-open [start, end) index runs where the sequence is a finite number. */
export function finiteRuns(values: Array<number | null>): Array<[number, number]> {
  const runs: Array<[number, number]> = [];
  let start = -1;
  for (let i = 0; i <= values.length; i++) {
    const v = i < values.length ? values[i] : null;
    const ok = v !== null && Number.isFinite(v);
    if (ok && start < 0) start = i;
    if (!ok && start >= 0) {
      runs.push([start, i]);
      start = -1;
    }
  }
  return runs;
}

export interface Scale {
  x(index: number): number;
  y(value: number): number;
}

/** Index-to-pixel and value-to-pixel mapping; y grows downward on canvas. */
export function makeScale(
  n: number,
  extent: Extent,
  width: number,
  height: number,
  margins: Margins = CHART_MARGINS,
): Scale {
  const innerW = Math.max(width - margins.left - margins.right, 1);
  const innerH = Math.max(height - margins.top - margins.bottom, 1);
  const span = extent.max - extent.min || 1;
  const step = n > 1 ? innerW / (n - 1) : 0;
  return {
    x: (index) => margins.left + (n > 1 ? index * step : innerW / 2),
    y: (value) => margins.top + (extent.max - value) / span * innerH,
  };
}

/** The 2D-context surface the renderer touches. */
export interface Canvas2dLike {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  textAlign: string;
  textBaseline: string;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
  clearRect(x: number, y: number, w: number, h: number): void;
}

const COLORS = {
  grid: "#2b2b31",
  label: "#8b8b94",
  band: "rgba(96, 165, 250, 0.16)",
  mu: "#60a5fa",
  value: "#e4e4e7",
  threshold: "#f87171",
  marker: "#fbbf24",
};

function tracePath(ctx: Canvas2dLike, values: Array<number | null>, scale: Scale): void {
  for (const [start, end] of finiteRuns(values)) {
    ctx.beginPath();
    for (let i = start; i < end; i++) {
      const px = scale.x(i);
      const py = scale.y(values[i] as number);
      if (i === start) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    }
    ctx.stroke();
  }
}

function shortTime(timestamp: string): string {
  // RFC3339 in, "MM-DD HH:MM" out; good enough for axis labels.
  return `${timestamp.slice(5, 10)} ${timestamp.slice(11, 16)}`;
}

/** Draw the whole pane onto an abstract 2D context. */
export function renderChart(
  ctx: Canvas2dLike,
  width: number,
  height: number,
  data: AnomalyContext,
): void {
  const points = data.points;
  const extent = valueExtent(data);
  const scale = makeScale(points.length, extent, width, height);
  const margins = CHART_MARGINS;

  ctx.clearRect(0, 0, width, height);
  ctx.setLineDash([]);

  // Horizontal grid with value labels.
  ctx.font = "10px ui-monospace, monospace";
  ctx.textBaseline = "middle";
  const ticks = 4;
  for (let t = 0; t <= ticks; t++) {
    const v = extent.min + ((extent.max - extent.min) * t) / ticks;
    const py = scale.y(v);
    ctx.strokeStyle = COLORS.grid;
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(margins.left, py);
    ctx.lineTo(width - margins.right, py);
    ctx.stroke();
    ctx.fillStyle = COLORS.label;
    ctx.textAlign = "right";
    ctx.fillText(formatTick(v), margins.left - 6, py);
  }

  // Quantile band as a filled polygon per contiguous forecast run.
  const bandUpper = envelope(points, data.band_z, 1);
  const bandLower = envelope(points, data.band_z, -1);
  ctx.fillStyle = COLORS.band;
  for (const [start, end] of finiteRuns(bandUpper)) {
    ctx.beginPath();
    for (let i = start; i < end; i++) ctx.lineTo(scale.x(i), scale.y(bandUpper[i] as number));
    for (let i = end - 1; i >= start; i--) ctx.lineTo(scale.x(i), scale.y(bandLower[i] as number));
    ctx.closePath();
    ctx.fill();
  }

  // Tail threshold envelope, dashed.
  ctx.strokeStyle = COLORS.threshold;
  ctx.lineWidth = 1;
  ctx.setLineDash([5, 4]);
  tracePath(ctx, envelope(points, data.z_q, 1), scale);
  tracePath(ctx, envelope(points, data.z_q, -1), scale);
  ctx.setLineDash([]);

  // Forecast mean.
  ctx.strokeStyle = COLORS.mu;
  ctx.lineWidth = 1.25;
  tracePath(ctx, points.map((p) => p.mu), scale);

  // Observed values, gap-aware, with point dots.
  const values = points.map((p) => p.value);
  ctx.strokeStyle = COLORS.value;
  ctx.lineWidth = 1.5;
  tracePath(ctx, values, scale);
  ctx.fillStyle = COLORS.value;
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    if (v === null || !Number.isFinite(v)) continue;
    ctx.beginPath();
    ctx.arc(scale.x(i), scale.y(v), 2, 0, Math.PI * 2);
    ctx.fill();
  }

  // Ring the anomalous observation and drop a guide line.
  const hit = points.findIndex((p) => p.timestamp === data.record.timestamp);
  if (hit >= 0) {
    const px = scale.x(hit);
    ctx.strokeStyle = COLORS.marker;
    ctx.lineWidth = 1;
    ctx.setLineDash([2, 3]);
    ctx.beginPath();
    ctx.moveTo(px, margins.top);
    ctx.lineTo(px, height - margins.bottom);
    ctx.stroke();
    ctx.setLineDash([]);
    const v = points[hit].value;
    if (v !== null && Number.isFinite(v)) {
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(px, scale.y(v), 5, 0, Math.PI * 2);
      ctx.stroke();
    }
  }

  // Time labels: ends plus the anomaly itself.
  ctx.fillStyle = COLORS.label;
  ctx.textBaseline = "top";
  const labelY = height - margins.bottom + 6;
  if (points.length > 0) {
    ctx.textAlign = "left";
    ctx.fillText(shortTime(points[0].timestamp), margins.left, labelY);
    ctx.textAlign = "right";
    ctx.fillText(shortTime(points[points.length - 1].timestamp), width - margins.right, labelY);
    if (hit > 0 && hit < points.length - 1) {
      ctx.textAlign = "center";
      ctx.fillText(shortTime(points[hit].timestamp), scale.x(hit), labelY);
    }
  }
}

function formatTick(v: number): string {
  const a = Math.abs(v);
  if (a >= 10000 || (a > 0 && a < 0.01)) return v.toExponential(1);
  if (a >= 100) return v.toFixed(0);
  return v.toFixed(2);
}

/**
 * Size the canvas for the device pixel ratio and render. Quietly does
 * nothing when no 2D context is available (non-browser DOMs).
 */
export function drawContextChart(canvas: HTMLCanvasElement, data: AnomalyContext): void {
  const cssWidth = canvas.clientWidth || Number(canvas.getAttribute("width")) || 640;
  const cssHeight = canvas.clientHeight || Number(canvas.getAttribute("height")) || 240;
  let ctx: CanvasRenderingContext2D | null = null;
  try {
    ctx = canvas.getContext("2d");
  } catch {
    ctx = null;
  }
  if (!ctx) return;
  const dpr = typeof devicePixelRatio === "number" && devicePixelRatio > 0 ? devicePixelRatio : 1;
  canvas.width = Math.round(cssWidth * dpr);
  canvas.height = Math.round(cssHeight * dpr);
  ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
  renderChart(ctx as unknown as Canvas2dLike, cssWidth, cssHeight, data);
}

/** One-line summary rendered next to the chart. */
export function describeContext(data: AnomalyContext): string {
  const n = data.points.length;
  const hours = (data.interval_s * Math.max(n - 1, 0)) / 3600;
  return `${n} points over ${hours.toFixed(0)} h, band z ${data.band_z.toFixed(2)}, `
    + `tail threshold z_q ${data.z_q.toFixed(2)}`;
}
