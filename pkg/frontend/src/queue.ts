/**
 * Queue presentation logic, kept free of DOM and transport concerns so the
 * ordering and verdict-state rules can be tested directly.
 */

import type { AnomalyRecord, Tier, Verdict } from "./types.js";

/**
 * Lifecycle of a row's verdict interaction:
 *   idle        nothing in flight; the committed verdict is shown
 *   submitting  a verdict POST is in flight; shown optimistically
 *   failed      the POST never reached the service; parked for retry
 *   conflict    the service refused the change; committed verdict restored
 */
export type RowPhase = "idle" | "submitting" | "failed" | "conflict";

export interface RowState {
  record: AnomalyRecord;
  phase: RowPhase;
  /** Operator's pick, held while in flight or parked for retry. */
  pendingVerdict: Verdict | null;
  notice: string | null;
}

export function toRows(records: AnomalyRecord[]): RowState[] {
  return sortRecords(records).map((record) => ({
    record,
    phase: "idle" as RowPhase,
    pendingVerdict: null,
    notice: null,
  }));
}

/**
 * Confidence descending; ties break on timestamp then id so the same data
 * always renders in the same order.
 */
export function sortRecords(records: AnomalyRecord[]): AnomalyRecord[] {
  return [...records].sort((a, b) => {
    if (b.confidence !== a.confidence) return b.confidence - a.confidence;
    if (a.timestamp !== b.timestamp) return a.timestamp < b.timestamp ? -1 : 1;
    return a.id < b.id ? -1 : a.id > b.id ? 1 : 0;
  });
}

export function findRow(rows: RowState[], id: string): RowState | undefined {
  return rows.find((row) => row.record.id === id);
}

export function tierCounts(rows: RowState[]): Record<Tier, number> {
  const counts: Record<Tier, number> = { high: 0, low: 0 };
  for (const row of rows) counts[row.record.tier] += 1;
  return counts;
}

/**
 * Verdict badge to display: the optimistic pick while a submit is in
 * flight, the committed verdict in every other phase. A failed submit
 * reverts the badge; the pending pick survives only in the retry chip.
 */
export function shownVerdict(row: RowState): Verdict {
  if (row.phase === "submitting" && row.pendingVerdict) return row.pendingVerdict;
  return row.record.verdict;
}

export function verdictLabel(verdict: Verdict): string {
  switch (verdict) {
    case "confirmed":
      return "Confirmed";
    case "false_flag":
      return "False flag";
    default:
      return "Unreviewed";
  }
}
