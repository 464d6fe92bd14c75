/**
 * Risk-factor panel state: a slider over a fixed quantile grid with a
 * server-computed preview of the high-tier count at each grid point.
 *
 * Every number shown comes from the service (GET /config/risk-factor and
 * GET /reports/sweep); this module only selects among server results, it
 * never computes thresholds itself.
 */

import type { RiskFactor, SweepRow } from "./types.js";

export const DEFAULT_GRID = [0.99, 0.995, 0.998, 0.999, 0.9995, 0.9998, 0.9999];

// Quantiles arrive as 1 - risk_q and go through float round trips; two
// values this close are the same grid point.
const Q_EPS = 1e-9;

export interface RiskPanelState {
  committed: RiskFactor;
  grid: number[];
  /** Slider position as an index into grid. */
  selected: number;
  /** Sweep preview rows aligned with grid, or null when no window exists yet. */
  rows: SweepRow[] | null;
  /** Window the preview was computed from. */
  window: string | null;
  notice: string | null;
  applying: boolean;
}

/** Slider grid: the defaults plus the committed quantile, ascending. */
export function buildGrid(committedQuantile: number, base: number[] = DEFAULT_GRID): number[] {
  const grid = [...base];
  if (!grid.some((q) => Math.abs(q - committedQuantile) < Q_EPS)) {
    grid.push(committedQuantile);
  }
  return grid.sort((a, b) => a - b);
}

/** Index of the grid point nearest to a quantile. */
export function gridIndexOf(grid: number[], quantile: number): number {
  let best = 0;
  let bestDist = Infinity;
  for (let i = 0; i < grid.length; i++) {
    const dist = Math.abs(grid[i] - quantile);
    if (dist < bestDist) {
      best = i;
      bestDist = dist;
    }
  }
  return best;
}

/** True when the slider sits on the committed quantile (the no-change state). */
export function atCommitted(state: RiskPanelState): boolean {
  const q = state.grid[state.selected];
  return q !== undefined && Math.abs(q - state.committed.quantile) < Q_EPS;
}

/** Sweep row for a grid index, or null when no preview is available. */
export function previewFor(state: RiskPanelState, index: number): SweepRow | null {
  if (!state.rows) return null;
  const q = state.grid[index];
  if (q === undefined) return null;
  return state.rows.find((row) => Math.abs(row.quantile - q) < Q_EPS) ?? null;
}

export function selectedQuantile(state: RiskPanelState): number {
  return state.grid[Math.min(Math.max(state.selected, 0), state.grid.length - 1)];
}

/** Quantiles render with enough digits to tell 0.9995 from 0.9998. */
export function formatQuantile(q: number): string {
  return q.toFixed(5).replace(/0+$/, "").replace(/\.$/, ".0");
}

export function formatRisk(riskQ: number): string {
  if (riskQ === 0) return "0";
  if (riskQ >= 0.01) return riskQ.toFixed(3);
  return riskQ.toExponential(2).replace(/e([+-])0?(\d)/, "e$1$2");
}
