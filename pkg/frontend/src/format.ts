// Fixed-point display formatting that reproduces the report generator's
// output digit for digit, so a number on screen always matches the same
// number in a generated report.
//
// JS toFixed and Python's format differ on exact ties: toFixed rounds half
// away from zero while Python rounds the shortest decimal of the actual
// double half to even (0.125 -> "0.12" vs toFixed's "0.13"). fixed() works
// on the exact decimal expansion of the double instead.

import type { EnergySummaryPayload } from "./types";

export function fixed(value: number, digits: number): string {
  if (Number.isNaN(value)) return "nan";
  if (!Number.isFinite(value)) return value > 0 ? "inf" : "-inf";
  const neg = value < 0 || Object.is(value, -0);
  const abs = Math.abs(value);
  if (abs >= 1e21) {
    // toFixed switches to exponential up here; metering never produces such
    // magnitudes so plain toFixed is an acceptable last resort
    return (neg ? "-" : "") + abs.toFixed(digits);
  }
  // exact for |x| >= 2^-48: the lowest significand bit is then >= 2^-100,
  // whose decimal expansion terminates within 100 fractional digits; smaller
  // values format as zeros at the digit counts used here
  const exact = abs.toFixed(100);
  const dot = exact.indexOf(".");
  let intPart = exact.slice(0, dot);
  const frac = exact.slice(dot + 1);
  let keep = frac.slice(0, digits);
  const tail = frac.slice(digits);

  let roundUp: boolean;
  const head = tail.charCodeAt(0) - 48;
  if (Number.isNaN(head) || head < 5) {
    roundUp = false;
  } else if (head > 5) {
    roundUp = true;
  } else if (/[1-9]/.test(tail.slice(1))) {
    roundUp = true;
  } else {
    // exact tie: round so the kept digit ends even
    const lastKept = digits > 0 ? keep.charCodeAt(digits - 1) - 48 : intPart.charCodeAt(intPart.length - 1) - 48;
    roundUp = lastKept % 2 === 1;
  }

  if (roundUp) {
    const combined = incrementDecimal(intPart + keep);
    const fracLen = keep.length;
    keep = fracLen > 0 ? combined.slice(-fracLen) : "";
    intPart = fracLen > 0 ? combined.slice(0, -fracLen) : combined;
    if (intPart === "") intPart = "0";
  }
  const body = digits > 0 ? `${intPart}.${keep}` : intPart;
  return neg ? `-${body}` : body;
}

function incrementDecimal(digitString: string): string {
  const out = digitString.split("");
  for (let i = out.length - 1; i >= 0; i--) {
    if (out[i] === "9") {
      out[i] = "0";
    } else {
      out[i] = String.fromCharCode(out[i]!.charCodeAt(0) + 1);
      return out.join("");
    }
  }
  return "1" + out.join("");
}

// the per-column rules shared by the report tables and the CLI
export const fmtKwh = (v: number) => fixed(v, 3);
export const fmtCurrency = (v: number) => fixed(v, 2);
export const fmtGrams = (v: number) => fixed(v, 1);
export const fmtWatts = (v: number) => fixed(v, 2);
export const fmtSeconds = (v: number) => fixed(v, 1);
export const fmtGaps = (count: number, seconds: number) => `${count} / ${fmtSeconds(seconds)} s`;

export const STATS_HEADER = [
  "experiment",
  "sessions",
  "duration s",
  "samples",
  "mean W",
  "energy kWh",
  "cost",
  "carbon g",
  "gaps",
] as const;

export function statsCells(label: string, sessions: number, s: EnergySummaryPayload): string[] {
  return [
    label,
    String(sessions),
    fmtSeconds(s.duration_s),
    String(s.sample_count),
    fmtWatts(s.mean_power_w),
    fmtKwh(s.energy_kwh),
    fmtCurrency(s.cost),
    fmtGrams(s.carbon_g),
    fmtGaps(s.gap_count, s.gap_seconds),
  ];
}

export function utcIso(tsMs: number): string {
  return new Date(tsMs).toISOString().slice(0, 19) + "Z";
}
