/**
 * Typed client for the detection service HTTP API.
 *
 * Every method maps to exactly one endpoint. Transport failures raise
 * NetworkError; non-2xx responses raise ApiError carrying the server's
 * {code, message, field} payload so callers can branch on the code
 * (VerdictConflict, OutOfRange, ...) instead of parsing messages.
 */

import type {
  AnomalyContext,
  AnomalyListing,
  AnomalyRecord,
  RiskFactor,
  RiskFactorUpdate,
  SweepRow,
  Tier,
  Verdict,
} from "./types.js";

/** The slice of a fetch Response this client actually uses. */
export interface HttpResponse {
  ok: boolean;
  status: number;
  statusText: string;
  json(): Promise<unknown>;
}

export interface HttpRequestInit {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

export type FetchLike = (url: string, init?: HttpRequestInit) => Promise<HttpResponse>;

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly field: string | null;

  constructor(status: number, code: string, message: string, field: string | null = null) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.field = field;
  }
}

/** The service could not be reached at all (offline, refused, aborted). */
export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

export interface AnomalyQuery {
  tier?: Tier | "all";
  from?: string;
  to?: string;
  window?: string;
}

export class TriageApi {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(base = "", fetchImpl?: FetchLike) {
    this.base = base.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  health(): Promise<{ status: string; model_loaded: boolean }> {
    return this.request("GET", "/api/v1/health");
  }

  anomalies(query: AnomalyQuery = {}): Promise<AnomalyListing> {
    const params = new URLSearchParams();
    if (query.tier) params.set("tier", query.tier);
    if (query.from) params.set("from", query.from);
    if (query.to) params.set("to", query.to);
    if (query.window) params.set("window", query.window);
    const qs = params.toString();
    return this.request("GET", `/api/v1/anomalies${qs ? `?${qs}` : ""}`);
  }

  context(recordId: string): Promise<AnomalyContext> {
    return this.request("GET", `/api/v1/anomalies/${encodeURIComponent(recordId)}/context`);
  }

  submitVerdict(recordId: string, verdict: Verdict): Promise<AnomalyRecord> {
    return this.request("POST", "/api/v1/feedback", { id: recordId, verdict });
  }

  riskFactor(): Promise<RiskFactor> {
    return this.request("GET", "/api/v1/config/risk-factor");
  }

  setRiskFactor(body: { quantile: number } | { risk_q: number }): Promise<RiskFactorUpdate> {
    return this.request("PUT", "/api/v1/config/risk-factor", body);
  }

  async funnelWindows(): Promise<string[]> {
    const doc = await this.request<{ windows: string[] }>("GET", "/api/v1/reports/funnel");
    return doc.windows;
  }

  async sweep(window: string, grid: number[]): Promise<SweepRow[]> {
    const params = new URLSearchParams({ window, grid: grid.join(",") });
    const doc = await this.request<{ rows: SweepRow[] }>(
      "GET",
      `/api/v1/reports/sweep?${params.toString()}`,
    );
    return doc.rows;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: HttpResponse;
    try {
      response = await this.fetchImpl(this.base + path, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err);
      throw new NetworkError(`service unreachable: ${reason}`);
    }
    if (!response.ok) {
      throw await errorFrom(response);
    }
    try {
      return (await response.json()) as T;
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err);
      throw new NetworkError(`unreadable response body: ${reason}`);
    }
  }
}

async function errorFrom(response: HttpResponse): Promise<ApiError> {
  let code = `http_${response.status}`;
  let message = response.statusText || `request failed with status ${response.status}`;
  let field: string | null = null;
  try {
    const payload = (await response.json()) as Record<string, unknown>;
    if (payload && typeof payload === "object") {
      if (typeof payload["code"] === "string") code = payload["code"];
      if (typeof payload["message"] === "string") {
        message = payload["message"];
      } else if (payload["detail"] !== undefined) {
        // Framework-level validation errors arrive as {detail: [...]}.
        message = JSON.stringify(payload["detail"]);
      }
      if (typeof payload["field"] === "string") field = payload["field"];
    }
  } catch {
    // Non-JSON error body; the status line already set usable defaults.
  }
  return new ApiError(response.status, code, message, field);
}
