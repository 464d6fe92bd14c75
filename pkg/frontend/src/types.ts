/**
 * Wire types for the detection service API (v1). Field names mirror the
 * JSON payloads exactly; this module performs no conversion.
 */

export type Tier = "high" | "low";

export type Verdict = "unreviewed" | "confirmed" | "false_flag";

export interface SeriesKey {
  provider_id: string;
  provider_id2: string;
  resource_region: string;
  metric_name: string;
  dimension: string;
  dimension_value: string;
}

export interface AnomalyRecord {
  id: string;
  key: SeriesKey;
  timestamp: string;
  window_id: string;
  tier: Tier;
  score: number;
  actual: number;
  mu: number;
  sigma: number;
  confidence: number;
  side: string;
  z_q_at_detection: number;
  verdict: Verdict;
  verdict_time: string | null;
}

export interface AnomalyListing {
  count: number;
  records: AnomalyRecord[];
}

export interface ContextPoint {
  timestamp: string;
  value: number | null;
  mu: number | null;
  sigma: number | null;
}

/** One anomaly plus the series values and forecast band around it. */
export interface AnomalyContext {
  record: AnomalyRecord;
  band_z: number;
  z_q: number;
  interval_s: number;
  points: ContextPoint[];
}

export interface RiskFactor {
  risk_q: number;
  quantile: number;
}

export interface RiskFactorUpdate extends RiskFactor {
  previous: number;
}

/** One row of a threshold sweep: the projected high-tier count at a quantile. */
export interface SweepRow {
  quantile: number;
  risk_q: number;
  z_q: number;
  high_count: number;
}

export interface FunnelReport {
  window_id: string;
  points_total: number;
  stage1_count: number;
  high_count: number;
  low_count: number;
  series_seen: number;
  series_skipped: number;
  risk_q: number;
  z_q: number | null;
  gamma: number | null;
  sigma: number | null;
  threshold_t: number | null;
  n_exceed: number;
  score_space: string;
  wall_time_s: number;
}
