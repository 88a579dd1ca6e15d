// Region behavior against a scripted API: the table is a pure projection of
// the stats payload, invalid settings never become requests, tariff edits
// refetch immediately, and the live feed drives the charts.

import { afterEach, beforeEach, describe, expect, it } from "vitest";
import { ApiClient } from "../src/api";
import { App } from "../src/app";
import { parseUiState } from "../src/state";
import type { LiveStreamOptions } from "../src/sse";
import type { StatsPayload } from "../src/types";
import { FakeStream, jsonResponse, sampleLine, stubFetch, until } from "./helpers";
import statsFixture from "./fixtures/stats_fixture.json";

const basePayload = (statsFixture as { payload: StatsPayload }).payload;
const expectedCells = (statsFixture as { expected_cells: string[][] }).expected_cells;

const catalogPayload = {
  experiments: [
    {
      experiment_id: "exp-a",
      sessions: [
        {
          session_id: "s1",
          plug_id: "p1",
          start_ts: 1_754_000_000_000,
          end_ts: 1_754_000_120_000,
          sample_count: 61,
          running: false,
          orphaned: false,
        },
        {
          session_id: "s2",
          plug_id: "p2",
          start_ts: 1_754_000_200_000,
          end_ts: null,
          sample_count: 61,
          running: true,
          orphaned: false,
        },
      ],
    },
    {
      experiment_id: "exp-b",
      sessions: [
        {
          session_id: "s1",
          plug_id: "p1",
          start_ts: 1_754_100_000_000,
          end_ts: 1_754_100_060_000,
          sample_count: 61,
          running: false,
          orphaned: false,
        },
      ],
    },
  ],
};

// a what-if response with sentinel numbers, so a cost cell showing these
// proves the cell came from the response and nowhere else
function editedPayload(price: number): StatsPayload {
  const payload = JSON.parse(JSON.stringify(basePayload)) as StatsPayload;
  payload.tariff.price_per_kwh = price;
  payload.experiments[0]!.row.cost = 123.456789;
  payload.experiments[1]!.row.cost = 23.4;
  payload.aggregate.cost = 146.856789;
  return payload;
}

interface Ctx {
  app: App;
  root: HTMLElement;
  calls: string[];
  streams: FakeStream[];
  failNetwork: { stats: boolean };
  setNow: (ms: number) => void;
}

async function makeApp(query: string): Promise<Ctx> {
  const failNetwork = { stats: false };
  const { fetch, calls } = stubFetch({
    "/api/health": () =>
      jsonResponse({ status: "ok", version: "0.1.0", kernel_backend: "numpy", collector_attached: true }),
    "/api/experiments": () => jsonResponse(catalogPayload),
    "/api/stats": (url) => {
      if (failNetwork.stats) throw new TypeError("fetch failed");
      const price = url.searchParams.get("price");
      return jsonResponse(price === null ? basePayload : editedPayload(Number(price)));
    },
    "/api/experiments/exp-a/sessions/s2/series": () =>
      jsonResponse({
        plug_id: "p2",
        t0_ms: 0,
        t1_ms: 4000,
        sample_count: 5,
        returned_points: 5,
        power: { ts_ms: [0, 1000, 2000, 3000, 4000], w: [1, 2, 3, 4, 5] },
        cumulative: { ts_ms: [0, 1000, 2000, 3000, 4000], kwh: [0, 1, 2, 3, 4] },
        gap_ts_ms: [2000],
        experiment_id: "exp-a",
        session_id: "s2",
      }),
    "/api/reports": () =>
      jsonResponse(
        {
          document: "/logs/reports/report-20260816T000000Z.md",
          sidecar: "/logs/reports/report-20260816T000000Z.summary.json",
          html: null,
          document_url: "/api/reports/report-20260816T000000Z.md",
          sidecar_url: "/api/reports/report-20260816T000000Z.summary.json",
          html_url: null,
          summary: {},
        },
        201,
      ),
  });
  const streams: FakeStream[] = [];
  let nowMs = 1_000_000;
  const root = document.createElement("div");
  document.body.appendChild(root);
  const app = new App({
    root,
    api: new ApiClient("http://stub.test", fetch),
    initialState: parseUiState(query),
    streamFactory: (url: string, opts: LiveStreamOptions) => {
      const stream = new FakeStream(url, opts);
      streams.push(stream);
      return stream;
    },
    now: () => nowMs,
    catalogRefreshMs: 3_600_000,
  });
  await app.init();
  return { app, root, calls, streams, failNetwork, setNow: (ms) => (nowMs = ms) };
}

function tableCells(root: HTMLElement): string[][] {
  return [...root.querySelectorAll<HTMLTableRowElement>("#stats-table tbody tr")].map((row) =>
    [...row.querySelectorAll("td")].map((cell) => cell.textContent ?? ""),
  );
}

let ctx: Ctx;

afterEach(() => {
  ctx.app.dispose();
  ctx.root.remove();
});

describe("region 3: statistics table", () => {
  beforeEach(async () => {
    ctx = await makeApp("?exp=exp-a,exp-b&live=0");
  });

  it("renders exactly the payload rows plus the aggregate", () => {
    expect(tableCells(ctx.root)).toEqual(expectedCells);
  });

  it("shows the tariff the server answered with", () => {
    const line = ctx.root.querySelector("#tariff-line")!.textContent;
    expect(line).toContain("0.3 EUR/kWh");
    expect(line).toContain("400");
  });

  it("keeps the cached table and raises the banner when the API goes away", async () => {
    const before = tableCells(ctx.root);
    ctx.failNetwork.stats = true;
    ctx.app.state.price = 9;
    await ctx.app.refetchStats();
    expect(ctx.root.querySelector("#banner")!.classList.contains("hidden")).toBe(false);
    expect(tableCells(ctx.root)).toEqual(before);
  });
});

describe("region 1: selection and report", () => {
  beforeEach(async () => {
    ctx = await makeApp("?exp=exp-a,exp-b&live=0");
  });

  it("lists every experiment with a session count", () => {
    const items = [...ctx.root.querySelectorAll("#exp-list li")];
    expect(items).toHaveLength(2);
    expect(items[0]!.textContent).toContain("exp-a");
    expect(items[0]!.textContent).toContain("2 sessions");
  });

  it("deselecting everything empties the table and disables the report button", async () => {
    for (const box of ctx.root.querySelectorAll<HTMLInputElement>("#exp-list input")) {
      box.checked = false;
      box.dispatchEvent(new Event("change"));
    }
    await until(() => ctx.root.querySelector("#stats-table") === null);
    expect(ctx.app.state.experiments).toEqual([]);
    expect(ctx.root.querySelector<HTMLButtonElement>("#report-btn")!.disabled).toBe(true);
    expect(ctx.root.querySelector("#stats-wrap")!.textContent).toContain("select one or more");
  });

  it("report button posts the current view and surfaces the link", async () => {
    ctx.root.querySelector<HTMLButtonElement>("#report-btn")!.click();
    await until(() => ctx.root.querySelector("#report-result a") !== null);
    const link = ctx.root.querySelector<HTMLAnchorElement>("#report-result a")!;
    expect(link.getAttribute("href")).toBe("/api/reports/report-20260816T000000Z.md");
    expect(link.textContent).toBe("report-20260816T000000Z.md");
    expect(ctx.calls.some((c) => c === "/api/reports")).toBe(true);
  });
});

describe("region 2: tariff what-ifs and validation", () => {
  beforeEach(async () => {
    ctx = await makeApp("?exp=exp-a,exp-b&live=0");
  });

  it("a negative price is rejected inline and no request leaves the page", () => {
    const input = ctx.root.querySelector<HTMLInputElement>("#price")!;
    const requestsBefore = ctx.calls.length;
    input.value = "-0.50";
    input.dispatchEvent(new Event("input"));
    expect(input.getAttribute("aria-invalid")).toBe("true");
    expect(ctx.root.querySelector("#price-error")!.textContent).not.toBe("");
    expect(ctx.calls.length).toBe(requestsBefore);
  });

  it("garbage input is rejected the same way", () => {
    const input = ctx.root.querySelector<HTMLInputElement>("#price")!;
    const requestsBefore = ctx.calls.length;
    input.value = "cheap";
    input.dispatchEvent(new Event("input"));
    expect(input.getAttribute("aria-invalid")).toBe("true");
    expect(ctx.calls.length).toBe(requestsBefore);
  });

  it("a price edit refetches immediately and the cost column follows the response", async () => {
    const input = ctx.root.querySelector<HTMLInputElement>("#price")!;
    input.value = "1.50";
    input.dispatchEvent(new Event("input"));
    await until(() => {
      const cells = tableCells(ctx.root);
      return cells.length > 0 && cells[0]![6] === "123.46";
    });
    expect(ctx.calls.at(-1)).toContain("price=1.5");
    const cells = tableCells(ctx.root);
    expect(cells[1]![6]).toBe("23.40");
    expect(cells[2]![6]).toBe("146.86");
    expect(input.getAttribute("aria-invalid")).toBeNull();
  });

  it("the baseline toggle asks for per-plug handling", async () => {
    const box = ctx.root.querySelector<HTMLInputElement>("#baseline")!;
    box.checked = true;
    box.dispatchEvent(new Event("change"));
    await until(() => ctx.calls.some((c) => c.includes("baseline=per-plug")));
    expect(ctx.app.state.baseline).toBe(true);
  });

  it("an out-of-range window is rejected inline", () => {
    const input = ctx.root.querySelector<HTMLInputElement>("#window")!;
    input.value = "3";
    input.dispatchEvent(new Event("input"));
    expect(input.getAttribute("aria-invalid")).toBe("true");
  });
});

describe("region 4: graphs", () => {
  it("renders historical series with a gap break when live is off", async () => {
    ctx = await makeApp("?exp=exp-a,exp-b&live=0&session=exp-a/s2");
    await ctx.app.refetchSeries();
    ctx.app.renderCharts();
    const power = ctx.root.querySelectorAll("#chart-power polyline");
    expect(power).toHaveLength(2); // the gap at t=2000 splits the line
    const energy = ctx.root.querySelectorAll("#chart-energy polyline");
    expect(energy).toHaveLength(2);
  });

  it("appends live samples through the stream and marks staleness", async () => {
    ctx = await makeApp("?exp=exp-a&plug=p1");
    expect(ctx.streams.length).toBe(1);
    const stream = ctx.streams[0]!;
    expect(stream.url).toContain("/api/live/p1");

    stream.sample(sampleLine(1_000_000, 1, "p1", 80.2, 10.0), 1);
    stream.sample(sampleLine(1_001_000, 2, "p1", 81.0, 10.022), 2);
    expect(ctx.app.buffer.size).toBe(2);
    ctx.app.renderCharts();
    expect(ctx.root.querySelectorAll("#chart-power polyline")).toHaveLength(1);
    expect(ctx.root.querySelectorAll("#chart-energy polyline")).toHaveLength(1);

    ctx.app.renderStaleness();
    expect(ctx.root.querySelector("#stats-stale")!.textContent).toBe("live");
    ctx.setNow(1_000_000 + 7_000);
    ctx.app.renderStaleness();
    expect(ctx.root.querySelector("#stats-stale")!.textContent).toContain("stale");
  });

  it("replayed samples after a resume do not duplicate points", async () => {
    ctx = await makeApp("?exp=exp-a&plug=p1");
    const stream = ctx.streams[0]!;
    stream.sample(sampleLine(1_000_000, 1, "p1", 80.2), 1);
    stream.sample(sampleLine(1_001_000, 2, "p1", 81.0), 2);
    stream.sample(sampleLine(1_000_000, 1, "p1", 80.2), 1);
    stream.sample(sampleLine(1_001_000, 2, "p1", 81.0), 2);
    expect(ctx.app.buffer.size).toBe(2);
  });

  it("pauses the stream while the tab is hidden and resumes after", async () => {
    ctx = await makeApp("?exp=exp-a&plug=p1");
    const stream = ctx.streams[0]!;
    expect(stream.started).toBe(1);
    Object.defineProperty(document, "hidden", { configurable: true, value: true });
    document.dispatchEvent(new Event("visibilitychange"));
    expect(stream.stopped).toBe(1);
    Object.defineProperty(document, "hidden", { configurable: true, value: false });
    document.dispatchEvent(new Event("visibilitychange"));
    expect(stream.started).toBe(2);
    expect(ctx.streams.length).toBe(1); // resumed, not replaced: Last-Event-ID survives
  });
});
