// Shapes of the monitoring API payloads, field for field. The dashboard
// renders these verbatim; it never derives energy, cost or carbon itself.

export interface HealthPayload {
  status: string;
  version: string;
  kernel_backend: string;
  collector_attached: boolean;
}

export interface SessionInfo {
  session_id: string;
  plug_id: string;
  start_ts: number;
  end_ts: number | null;
  sample_count: number;
  running: boolean;
  orphaned: boolean;
}

export interface ExperimentInfo {
  experiment_id: string;
  sessions: SessionInfo[];
}

export interface CatalogPayload {
  experiments: ExperimentInfo[];
}

export interface TariffPayload {
  price_per_kwh: number;
  carbon_g_per_kwh: number;
  currency_label: string;
}

export interface EnergySummaryPayload {
  experiment_id: string;
  duration_s: number;
  sample_count: number;
  mean_power_w: number;
  std_power_w: number;
  min_power_w: number;
  max_power_w: number;
  energy_kwh_integrated: number;
  energy_kwh_counter: number | null;
  energy_kwh: number;
  cost: number;
  carbon_g: number;
  gap_count: number;
  gap_seconds: number;
  baseline_power_w: number | null;
  net_energy_kwh: number | null;
}

export interface StatsExperimentEntry {
  experiment_id: string;
  session_count: number;
  row: EnergySummaryPayload;
  sessions: {
    session_id: string;
    plug_id: string;
    running: boolean;
    orphaned: boolean;
    summary: EnergySummaryPayload;
  }[];
}

export interface StatsPayload {
  tariff: TariffPayload;
  baseline_mode: string;
  experiments: StatsExperimentEntry[];
  aggregate: EnergySummaryPayload;
}

export interface SeriesPayload {
  plug_id: string;
  t0_ms: number;
  t1_ms: number;
  sample_count: number;
  returned_points: number;
  power: { ts_ms: number[]; w: number[] };
  cumulative: { ts_ms: number[]; kwh: number[] };
  gap_ts_ms: number[];
  experiment_id: string;
  session_id: string;
}

export interface EventEntry {
  ts: number;
  severity: string;
  kind: string;
  plug_id?: string;
  detail: string;
}

export interface ReportResult {
  document: string;
  sidecar: string;
  html: string | null;
  document_url: string;
  sidecar_url: string;
  html_url: string | null;
  summary: Record<string, unknown>;
}

// one line of a sample stream, as served over the live feed
export interface LiveSample {
  ts: number;
  seq: number;
  plug: string;
  w: number;
  wh?: number;
  flags?: string[];
}

export function parseLiveSample(data: string): LiveSample | null {
  let obj: unknown;
  try {
    obj = JSON.parse(data);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const rec = obj as Record<string, unknown>;
  if (
    typeof rec.ts !== "number" ||
    typeof rec.seq !== "number" ||
    typeof rec.plug !== "string" ||
    typeof rec.w !== "number"
  ) {
    return null;
  }
  const sample: LiveSample = {
    ts: rec.ts,
    seq: rec.seq,
    plug: rec.plug,
    w: rec.w,
  };
  if (typeof rec.wh === "number") sample.wh = rec.wh;
  if (Array.isArray(rec.flags)) sample.flags = rec.flags.filter((f): f is string => typeof f === "string");
  return sample;
}
