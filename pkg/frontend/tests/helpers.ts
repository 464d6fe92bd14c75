/**
 * Test fixtures: record builders and an in-memory fake of the detection
 * service speaking the same wire shapes, with a request log and failure
 * injection for connectivity and conflict scenarios.
 */

import type { FetchLike, HttpResponse } from "../src/api.js";
import type {
  AnomalyRecord,
  ContextPoint,
  SweepRow,
  Tier,
  Verdict,
} from "../src/types.js";

export const WINDOW_ID = "20260112T000000Z";

const BASE_MS = Date.parse("2026-01-12T00:00:00Z");

function rfc3339(ms: number): string {
  return new Date(ms).toISOString().replace(".000Z", "Z");
}

export function makeRecord(i: number, overrides: Partial<AnomalyRecord> = {}): AnomalyRecord {
  return {
    id: `rec-${String(i).padStart(4, "0")}`,
    key: {
      provider_id: "acct-1",
      provider_id2: "svc-api",
      resource_region: "eu-west-1",
      metric_name: "requests_per_hour",
      dimension: "endpoint",
      dimension_value: `api-${String(i % 40).padStart(2, "0")}`,
    },
    timestamp: rfc3339(BASE_MS + i * 60_000),
    window_id: WINDOW_ID,
    tier: "high",
    score: 8.5 - i * 0.01,
    actual: 420.0 + i,
    mu: 100.0,
    sigma: 12.0,
    confidence: 0.999 - i * 0.0005,
    side: "above",
    z_q_at_detection: 6.0,
    verdict: "unreviewed",
    verdict_time: null,
    ...overrides,
  };
}

/** nHigh high-tier then nLow low-tier records, confidence descending overall. */
export function fixtureRecords(nHigh: number, nLow: number): AnomalyRecord[] {
  const records: AnomalyRecord[] = [];
  for (let i = 0; i < nHigh; i++) records.push(makeRecord(i));
  for (let j = 0; j < nLow; j++) {
    records.push(makeRecord(nHigh + j, {
      tier: "low",
      score: 4.8 - j * 0.001,
      confidence: 0.95 - j * 0.0005,
    }));
  }
  return records;
}

export function contextPoints(record: AnomalyRecord, n = 13): ContextPoint[] {
  const anchor = Date.parse(record.timestamp);
  const half = Math.floor(n / 2);
  const points: ContextPoint[] = [];
  for (let i = 0; i < n; i++) {
    const ts = rfc3339(anchor + (i - half) * 3_600_000);
    const atAnomaly = i === half;
    points.push({
      timestamp: ts,
      value: atAnomaly ? record.actual : 100 + Math.sin(i) * 8,
      mu: 100 + Math.sin(i) * 6,
      sigma: 12.0,
    });
  }
  return points;
}

interface JsonBody {
  [key: string]: unknown;
}

export interface LoggedRequest {
  method: string;
  path: string;
  query: URLSearchParams;
  body: JsonBody | null;
}

function jsonResponse(status: number, payload: unknown): HttpResponse {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: status === 200 ? "OK" : "",
    json: async () => payload,
  };
}

interface Hold {
  match: (req: LoggedRequest) => boolean;
  promise: Promise<void>;
  release: () => void;
}

export class FakeService {
  records = new Map<string, AnomalyRecord>();
  riskQ = 0.002;
  windows: string[] = [WINDOW_ID];
  bandZ = 4.09;
  zQ = 6.0;
  log: LoggedRequest[] = [];

  /** Requests matching this reject at the transport level. */
  offlineWhen: ((req: LoggedRequest) => boolean) | null = null;
  /** Forces PUT /config/risk-factor to fail with this message. */
  rejectRiskPut: string | null = null;

  /** Projected high-tier count at a sweep quantile; non-increasing in q. */
  sweepCountFor: (q: number) => number = (q) => Math.max(0, Math.round((1 - q) * 4000));

  private holds: Hold[] = [];

  constructor(records: AnomalyRecord[] = []) {
    for (const rec of records) this.records.set(rec.id, rec);
  }

  /** Park matching requests until release() fires; for in-flight UI checks. */
  pause(match: (req: LoggedRequest) => boolean): () => void {
    let release: () => void = () => undefined;
    const promise = new Promise<void>((resolve) => {
      release = resolve;
    });
    const hold: Hold = { match, promise, release };
    this.holds.push(hold);
    return () => {
      this.holds = this.holds.filter((h) => h !== hold);
      hold.release();
    };
  }

  requests(filter?: (req: LoggedRequest) => boolean): LoggedRequest[] {
    return filter ? this.log.filter(filter) : [...this.log];
  }

  mutations(): LoggedRequest[] {
    return this.log.filter((req) => req.method !== "GET");
  }

  fetchImpl: FetchLike = async (url, init) => {
    const parsed = new URL(url, "http://service.test");
    const req: LoggedRequest = {
      method: init?.method ?? "GET",
      path: parsed.pathname,
      query: parsed.searchParams,
      body: init?.body ? (JSON.parse(init.body) as JsonBody) : null,
    };
    this.log.push(req);
    for (const hold of this.holds) {
      if (hold.match(req)) await hold.promise;
    }
    if (this.offlineWhen && this.offlineWhen(req)) {
      throw new TypeError("fetch failed");
    }
    return this.route(req);
  };

  private route(req: LoggedRequest): HttpResponse {
    const { method, path, query } = req;
    if (method === "GET" && path === "/api/v1/health") {
      return jsonResponse(200, { status: "ok", model_loaded: true });
    }
    if (method === "GET" && path === "/api/v1/anomalies") {
      return this.listAnomalies(query);
    }
    const contextMatch = path.match(/^\/api\/v1\/anomalies\/([^/]+)\/context$/);
    if (method === "GET" && contextMatch) {
      return this.context(decodeURIComponent(contextMatch[1]));
    }
    if (method === "POST" && path === "/api/v1/feedback") {
      return this.feedback(req.body ?? {});
    }
    if (method === "GET" && path === "/api/v1/config/risk-factor") {
      return jsonResponse(200, { risk_q: this.riskQ, quantile: 1 - this.riskQ });
    }
    if (method === "PUT" && path === "/api/v1/config/risk-factor") {
      return this.putRisk(req.body ?? {});
    }
    if (method === "GET" && path === "/api/v1/reports/funnel") {
      return jsonResponse(200, { windows: [...this.windows] });
    }
    if (method === "GET" && path === "/api/v1/reports/sweep") {
      return this.sweep(query);
    }
    return jsonResponse(404, { code: "NotFound", message: `no route ${method} ${path}` });
  }

  private listAnomalies(query: URLSearchParams): HttpResponse {
    const tier = (query.get("tier") ?? "all") as Tier | "all";
    const from = query.get("from");
    const to = query.get("to");
    let records = [...this.records.values()];
    if (tier !== "all") records = records.filter((r) => r.tier === tier);
    if (from) records = records.filter((r) => r.timestamp >= from);
    if (to) records = records.filter((r) => r.timestamp < to);
    return jsonResponse(200, { count: records.length, records });
  }

  private context(id: string): HttpResponse {
    const rec = this.records.get(id);
    if (!rec) return jsonResponse(404, { code: "NotFound", message: `no record ${id}` });
    return jsonResponse(200, {
      record: rec,
      band_z: this.bandZ,
      z_q: this.zQ,
      interval_s: 3600,
      points: contextPoints(rec),
    });
  }

  private feedback(body: JsonBody): HttpResponse {
    const id = String(body["id"] ?? "");
    const verdict = String(body["verdict"] ?? "") as Verdict;
    const rec = this.records.get(id);
    if (!rec) return jsonResponse(404, { code: "NotFound", message: `no record ${id}` });
    if (rec.verdict !== "unreviewed" && rec.verdict !== verdict) {
      return jsonResponse(409, {
        code: "VerdictConflict",
        message: `record ${id} already marked ${rec.verdict}; refuse to flip to ${verdict}`,
      });
    }
    if (rec.verdict === "unreviewed") {
      const updated = { ...rec, verdict, verdict_time: "2026-01-12T09:30:00Z" };
      this.records.set(id, updated);
      return jsonResponse(200, updated);
    }
    return jsonResponse(200, rec);
  }

  private putRisk(body: JsonBody): HttpResponse {
    if (this.rejectRiskPut !== null) {
      return jsonResponse(400, { code: "OutOfRange", message: this.rejectRiskPut, field: "risk_q" });
    }
    let value: number;
    if (typeof body["risk_q"] === "number") {
      value = body["risk_q"];
    } else if (typeof body["quantile"] === "number") {
      value = 1 - body["quantile"];
    } else {
      return jsonResponse(400, {
        code: "SchemaViolation",
        message: "risk-factor body needs risk_q or quantile",
      });
    }
    if (!(value > 0 && value < 0.5)) {
      return jsonResponse(400, {
        code: "OutOfRange",
        message: `risk factor must be in (0, 0.5), got ${value}`,
        field: "risk_q",
      });
    }
    const previous = this.riskQ;
    this.riskQ = value;
    return jsonResponse(200, { risk_q: value, quantile: 1 - value, previous });
  }

  private sweep(query: URLSearchParams): HttpResponse {
    const window = query.get("window") ?? "";
    if (!this.windows.includes(window)) {
      return jsonResponse(404, { code: "NotFound", message: `no committed window ${window}` });
    }
    const grid = (query.get("grid") ?? "").split(",").map(Number);
    const rows: SweepRow[] = grid.map((q) => ({
      quantile: q,
      risk_q: 1 - q,
      z_q: 3 + (q - 0.99) * 400,
      high_count: this.sweepCountFor(q),
    }));
    return jsonResponse(200, { rows });
  }
}

/** Waits a macrotask round so fire-and-forget handlers settle. */
export async function flush(rounds = 1): Promise<void> {
  for (let i = 0; i < rounds; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}
