// Thin typed client for the monitoring API. Every method returns the server
// payload as-is; callers render, they do not recompute.

import type {
  CatalogPayload,
  EventEntry,
  HealthPayload,
  ReportResult,
  SeriesPayload,
  StatsPayload,
} from "./types";
import type { UiState } from "./state";

export class ApiError extends Error {
  readonly status: number;
  readonly hint: string | null;

  constructor(status: number, detail: string, hint: string | null = null) {
    super(detail);
    this.status = status;
    this.hint = hint;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn?: FetchLike) {
    // trailing slash would double up when paths are appended
    this.baseUrl = baseUrl.replace(/\/$/, "");
    const raw = fetchFn ?? globalThis.fetch;
    this.fetchFn = (input, init) => raw(input, init);
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      headers: { Accept: "application/json" },
    });
    return this.decode<T>(response);
  }

  private async decode<T>(response: Response): Promise<T> {
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      let hint: string | null = null;
      try {
        const body = (await response.json()) as { detail?: string; hint?: string };
        if (typeof body.detail === "string") detail = body.detail;
        if (typeof body.hint === "string") hint = body.hint;
      } catch {
        // non-JSON error body, keep the status line
      }
      throw new ApiError(response.status, detail, hint);
    }
    return (await response.json()) as T;
  }

  health(): Promise<HealthPayload> {
    return this.getJson("/api/health");
  }

  experiments(): Promise<CatalogPayload> {
    return this.getJson("/api/experiments");
  }

  stats(state: UiState): Promise<StatsPayload> {
    const params = new URLSearchParams();
    params.set("experiments", state.experiments.join(","));
    if (state.price !== null) params.set("price", String(state.price));
    if (state.carbon !== null) params.set("carbon", String(state.carbon));
    if (state.currency !== null) params.set("currency", state.currency);
    if (state.baseline) params.set("baseline", "per-plug");
    return this.getJson(`/api/stats?${params.toString()}`);
  }

  series(
    experimentId: string,
    sessionId: string,
    opts: { from?: number; to?: number; maxPoints?: number } = {},
  ): Promise<SeriesPayload> {
    const params = new URLSearchParams();
    if (opts.from !== undefined) params.set("from", String(opts.from));
    if (opts.to !== undefined) params.set("to", String(opts.to));
    if (opts.maxPoints !== undefined) params.set("max_points", String(opts.maxPoints));
    const query = params.toString();
    const path =
      `/api/experiments/${encodeURIComponent(experimentId)}` +
      `/sessions/${encodeURIComponent(sessionId)}/series` +
      (query ? `?${query}` : "");
    return this.getJson(path);
  }

  events(limit = 100): Promise<{ events: EventEntry[] }> {
    return this.getJson(`/api/events?limit=${limit}`);
  }

  async report(state: UiState): Promise<ReportResult> {
    const body: Record<string, unknown> = {
      experiments: state.experiments,
      baseline_mode: state.baseline ? "per-plug" : "none",
      max_points: state.maxPoints,
      output_format: "html",
    };
    const tariff: Record<string, unknown> = {};
    if (state.price !== null) tariff.price_per_kwh = state.price;
    if (state.carbon !== null) tariff.carbon_g_per_kwh = state.carbon;
    if (state.currency !== null) tariff.currency = state.currency;
    if (Object.keys(tariff).length > 0) body.tariff = tariff;
    const response = await this.fetchFn(this.baseUrl + "/api/reports", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return this.decode<ReportResult>(response);
  }

  async startSession(plugId: string, experimentId: string, notes = ""): Promise<unknown> {
    return this.sessionAction({ action: "start", plug_id: plugId, experiment_id: experimentId, notes });
  }

  async stopSession(plugId: string): Promise<unknown> {
    return this.sessionAction({ action: "stop", plug_id: plugId });
  }

  private async sessionAction(body: Record<string, unknown>): Promise<unknown> {
    const response = await this.fetchFn(this.baseUrl + "/api/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return this.decode(response);
  }

  liveUrl(plugId: string): string {
    return `${this.baseUrl}/api/live/${encodeURIComponent(plugId)}`;
  }
}
