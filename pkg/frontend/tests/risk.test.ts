import { describe, expect, it } from "vitest";

import {
  DEFAULT_GRID,
  atCommitted,
  buildGrid,
  formatQuantile,
  formatRisk,
  gridIndexOf,
  previewFor,
  selectedQuantile,
  type RiskPanelState,
} from "../src/risk.js";
import type { SweepRow } from "../src/types.js";

function rowsFor(grid: number[], countFor: (q: number) => number): SweepRow[] {
  return grid.map((q) => ({
    quantile: q,
    risk_q: 1 - q,
    z_q: 3 + (q - 0.99) * 400,
    high_count: countFor(q),
  }));
}

function stateFor(committedQ: number, countFor: (q: number) => number): RiskPanelState {
  const grid = buildGrid(committedQ);
  return {
    committed: { risk_q: 1 - committedQ, quantile: committedQ },
    grid,
    selected: gridIndexOf(grid, committedQ),
    rows: rowsFor(grid, countFor),
    window: "20260112T000000Z",
    notice: null,
    applying: false,
  };
}

describe("buildGrid", () => {
  it("keeps the default grid when the committed point is already on it", () => {
    expect(buildGrid(0.998)).toEqual(DEFAULT_GRID);
  });

  it("dedupes a committed point computed as 1 - risk_q", () => {
    expect(buildGrid(1 - 0.002)).toEqual(DEFAULT_GRID);
  });

  it("inserts an off-grid committed point in ascending position", () => {
    const grid = buildGrid(0.997);
    expect(grid).toContain(0.997);
    expect(grid.length).toBe(DEFAULT_GRID.length + 1);
    const sorted = [...grid].sort((a, b) => a - b);
    expect(grid).toEqual(sorted);
  });
});

describe("gridIndexOf / atCommitted", () => {
  it("finds the nearest grid point", () => {
    const grid = buildGrid(0.998);
    expect(grid[gridIndexOf(grid, 0.998)]).toBe(0.998);
    expect(grid[gridIndexOf(grid, 0.9981)]).toBe(0.998);
  });

  it("treats within-epsilon quantiles as the committed point", () => {
    const state = stateFor(0.998, () => 8);
    expect(atCommitted(state)).toBe(true);
    state.selected = gridIndexOf(state.grid, 0.999);
    expect(atCommitted(state)).toBe(false);
  });
});

describe("previewFor / selectedQuantile", () => {
  const countFor = (q: number) => Math.max(0, Math.round((1 - q) * 4000));

  it("returns the sweep row matching a grid index", () => {
    const state = stateFor(0.998, countFor);
    const committedRow = previewFor(state, state.selected);
    expect(committedRow?.high_count).toBe(8);
  });

  it("returns null when no sweep rows are loaded", () => {
    const state = stateFor(0.998, countFor);
    state.rows = null;
    expect(previewFor(state, state.selected)).toBeNull();
  });

  it("clamps the selected index to the grid", () => {
    const state = stateFor(0.998, countFor);
    state.selected = 999;
    expect(selectedQuantile(state)).toBe(state.grid[state.grid.length - 1]);
    state.selected = -3;
    expect(selectedQuantile(state)).toBe(state.grid[0]);
  });

  it("previews a count no larger than the committed count at any stricter point", () => {
    const state = stateFor(0.998, countFor);
    const committed = previewFor(state, state.selected)!.high_count;
    for (let i = state.selected + 1; i < state.grid.length; i++) {
      const stricter = previewFor(state, i);
      expect(stricter).not.toBeNull();
      expect(stricter!.high_count).toBeLessThanOrEqual(committed);
    }
  });
});

describe("formatting", () => {
  it("formats quantiles without trailing zeros", () => {
    expect(formatQuantile(0.998)).toBe("0.998");
    expect(formatQuantile(0.9995)).toBe("0.9995");
    expect(formatQuantile(0.99)).toBe("0.99");
  });

  it("formats risk values at readable precision", () => {
    expect(formatRisk(0.05)).toBe("0.050");
    expect(formatRisk(0.002)).toBe("2.00e-3");
    expect(formatRisk(0)).toBe("0");
  });
});
