import { describe, expect, it } from "vitest";
import {
  checkIntInRange,
  checkNonNegative,
  defaultState,
  parseUiState,
  serializeUiState,
} from "../src/state";

describe("url round trip", () => {
  it("defaults serialize to an empty query", () => {
    expect(serializeUiState(defaultState())).toBe("");
  });

  it("survives a full round trip", () => {
    const state = defaultState();
    state.experiments = ["train-a", "train-b"];
    state.price = 0.42;
    state.carbon = 120;
    state.currency = "USD";
    state.baseline = true;
    state.windowS = 600;
    state.maxPoints = 1500;
    state.live = false;
    state.plug = "gpu-rig";
    state.session = "train-a/s123";
    const query = serializeUiState(state);
    expect(parseUiState("?" + query)).toEqual(state);
  });

  it("keeps equal states on equal links", () => {
    const a = defaultState();
    a.experiments = ["x"];
    a.price = 1;
    const b = defaultState();
    b.price = 1;
    b.experiments = ["x"];
    expect(serializeUiState(a)).toBe(serializeUiState(b));
  });

  it("ignores malformed values instead of breaking the page", () => {
    const state = parseUiState("?price=-2&carbon=abc&window=9&points=1&session=nope&live=0");
    expect(state.price).toBeNull();
    expect(state.carbon).toBeNull();
    expect(state.windowS).toBe(defaultState().windowS);
    expect(state.maxPoints).toBe(defaultState().maxPoints);
    expect(state.session).toBeNull();
    expect(state.live).toBe(false);
  });

  it("round-trips experiment ids containing url metacharacters", () => {
    const state = defaultState();
    state.experiments = ["a b", "c&d"];
    expect(parseUiState("?" + serializeUiState(state)).experiments).toEqual(["a b", "c&d"]);
  });
});

describe("numeric validation", () => {
  it("accepts non-negative decimals", () => {
    expect(checkNonNegative("0")).toEqual({ ok: true, value: 0 });
    expect(checkNonNegative(" 0.30 ")).toEqual({ ok: true, value: 0.3 });
    expect(checkNonNegative("1e-3")).toEqual({ ok: true, value: 0.001 });
  });

  it("rejects negatives, junk, blanks and infinities", () => {
    expect(checkNonNegative("-0.01").ok).toBe(false);
    expect(checkNonNegative("abc").ok).toBe(false);
    expect(checkNonNegative("").ok).toBe(false);
    expect(checkNonNegative("Infinity").ok).toBe(false);
    expect(checkNonNegative("NaN").ok).toBe(false);
  });

  it("bounds integer settings", () => {
    expect(checkIntInRange("600", 10, 86400)).toEqual({ ok: true, value: 600 });
    expect(checkIntInRange("9", 10, 86400).ok).toBe(false);
    expect(checkIntInRange("86401", 10, 86400).ok).toBe(false);
    expect(checkIntInRange("1.5", 10, 86400).ok).toBe(false);
  });
});
