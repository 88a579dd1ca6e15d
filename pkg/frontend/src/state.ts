// Dashboard state, round-tripped through the URL query string so a view
// (selection, what-if tariff, graph window) survives reloads and can be
// shared as a link.

export interface UiState {
  experiments: string[];
  // null means "use the server's configured tariff"
  price: number | null;
  carbon: number | null;
  currency: string | null;
  baseline: boolean;
  windowS: number;
  maxPoints: number;
  live: boolean;
  plug: string | null;
  // "experiment/session" pair backing the historical graphs
  session: string | null;
}

export const WINDOW_MIN_S = 10;
export const WINDOW_MAX_S = 86_400;
export const POINTS_MIN = 2;
export const POINTS_MAX = 20_000;

export function defaultState(): UiState {
  return {
    experiments: [],
    price: null,
    carbon: null,
    currency: null,
    baseline: false,
    windowS: 300,
    maxPoints: 600,
    live: true,
    plug: null,
    session: null,
  };
}

export type NumCheck = { ok: true; value: number } | { ok: false; reason: string };

// tariff inputs must be validated before any request leaves the page
export function checkNonNegative(text: string): NumCheck {
  const trimmed = text.trim();
  if (trimmed === "") return { ok: false, reason: "enter a number" };
  const value = Number(trimmed);
  if (!Number.isFinite(value)) return { ok: false, reason: "not a number" };
  if (value < 0) return { ok: false, reason: "must be ≥ 0" };
  return { ok: true, value };
}

export function checkIntInRange(text: string, lo: number, hi: number): NumCheck {
  const trimmed = text.trim();
  if (trimmed === "") return { ok: false, reason: "enter a number" };
  const value = Number(trimmed);
  if (!Number.isInteger(value)) return { ok: false, reason: "whole number required" };
  if (value < lo || value > hi) return { ok: false, reason: `must be ${lo}..${hi}` };
  return { ok: true, value };
}

export function parseUiState(search: string): UiState {
  const state = defaultState();
  const params = new URLSearchParams(search);

  const exp = params.get("exp");
  if (exp) state.experiments = exp.split(",").filter((e) => e.trim() !== "");

  const price = params.get("price");
  if (price !== null) {
    const check = checkNonNegative(price);
    if (check.ok) state.price = check.value;
  }
  const carbon = params.get("carbon");
  if (carbon !== null) {
    const check = checkNonNegative(carbon);
    if (check.ok) state.carbon = check.value;
  }
  const currency = params.get("currency");
  if (currency) state.currency = currency;

  state.baseline = params.get("baseline") === "1";

  const windowRaw = params.get("window");
  if (windowRaw !== null) {
    const check = checkIntInRange(windowRaw, WINDOW_MIN_S, WINDOW_MAX_S);
    if (check.ok) state.windowS = check.value;
  }
  const pointsRaw = params.get("points");
  if (pointsRaw !== null) {
    const check = checkIntInRange(pointsRaw, POINTS_MIN, POINTS_MAX);
    if (check.ok) state.maxPoints = check.value;
  }

  if (params.get("live") === "0") state.live = false;
  const plug = params.get("plug");
  if (plug) state.plug = plug;
  const session = params.get("session");
  if (session && session.includes("/")) state.session = session;
  return state;
}

// canonical parameter order, defaults omitted, so equal states give equal links
export function serializeUiState(state: UiState): string {
  const base = defaultState();
  const params = new URLSearchParams();
  if (state.experiments.length > 0) params.set("exp", state.experiments.join(","));
  if (state.price !== null) params.set("price", String(state.price));
  if (state.carbon !== null) params.set("carbon", String(state.carbon));
  if (state.currency !== null) params.set("currency", state.currency);
  if (state.baseline) params.set("baseline", "1");
  if (state.windowS !== base.windowS) params.set("window", String(state.windowS));
  if (state.maxPoints !== base.maxPoints) params.set("points", String(state.maxPoints));
  if (!state.live) params.set("live", "0");
  if (state.plug !== null) params.set("plug", state.plug);
  if (state.session !== null) params.set("session", state.session);
  return params.toString();
}
