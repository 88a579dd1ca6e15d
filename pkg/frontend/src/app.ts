// The dashboard's four regions and their wiring:
//   1. experiment selection and report generation
//   2. tariff what-ifs and graph settings
//   3. statistics table
//   4. live power and cumulative-energy graphs
//
// Every number shown comes from an API payload; this module formats and
// places values, it never computes energy, cost or carbon.

import { ApiClient, ApiError } from "./api";
import { renderChart } from "./chart";
import { STATS_HEADER, statsCells } from "./format";
import { LiveBuffer, segmentsFromSeries } from "./live";
import { LiveStream, type LiveStreamOptions, type SseMessage } from "./sse";
import {
  POINTS_MAX,
  POINTS_MIN,
  WINDOW_MAX_S,
  WINDOW_MIN_S,
  checkIntInRange,
  checkNonNegative,
  defaultState,
  type UiState,
} from "./state";
import {
  parseLiveSample,
  type CatalogPayload,
  type SeriesPayload,
  type StatsPayload,
} from "./types";

export type StreamFactory = (url: string, opts: LiveStreamOptions) => LiveStream;

export interface AppOptions {
  root: HTMLElement;
  api: ApiClient;
  initialState?: UiState;
  onStateChange?: (state: UiState) => void;
  streamFactory?: StreamFactory;
  now?: () => number;
  catalogRefreshMs?: number;
}

function h<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) node.append(child);
  return node;
}

export class App {
  state: UiState;
  lastStats: StatsPayload | null = null;
  lastSeries: SeriesPayload | null = null;
  readonly buffer = new LiveBuffer();

  private readonly root: HTMLElement;
  private readonly api: ApiClient;
  private readonly onStateChange: ((state: UiState) => void) | undefined;
  private readonly makeStream: StreamFactory;
  private readonly nowFn: () => number;
  private readonly catalogRefreshMs: number;

  private catalog: CatalogPayload = { experiments: [] };
  private stream: LiveStream | null = null;
  private lastSampleArrival: number | null = null;
  private statsEpoch = 0;
  private seriesEpoch = 0;
  private chartTimer: ReturnType<typeof setTimeout> | null = null;
  private timers: ReturnType<typeof setInterval>[] = [];
  private readonly onVisibility = () => {
    this.syncStream();
  };

  // element handles, filled by buildSkeleton
  private els!: {
    banner: HTMLElement;
    version: HTMLElement;
    expList: HTMLUListElement;
    reportBtn: HTMLButtonElement;
    reportResult: HTMLElement;
    price: HTMLInputElement;
    priceErr: HTMLElement;
    carbon: HTMLInputElement;
    carbonErr: HTMLElement;
    currency: HTMLInputElement;
    baseline: HTMLInputElement;
    window: HTMLInputElement;
    windowErr: HTMLElement;
    points: HTMLInputElement;
    pointsErr: HTMLElement;
    live: HTMLInputElement;
    plug: HTMLSelectElement;
    staleBadge: HTMLElement;
    tariffLine: HTMLElement;
    statsWrap: HTMLElement;
    statsNote: HTMLElement;
    chartPower: HTMLElement;
    chartEnergy: HTMLElement;
  };

  constructor(opts: AppOptions) {
    this.root = opts.root;
    this.api = opts.api;
    this.state = opts.initialState ?? defaultState();
    this.onStateChange = opts.onStateChange;
    this.makeStream = opts.streamFactory ?? ((url, o) => new LiveStream(url, o));
    this.nowFn = opts.now ?? (() => Date.now());
    this.catalogRefreshMs = opts.catalogRefreshMs ?? 15_000;
    this.buildSkeleton();
    this.wireInputs();
  }

  async init(): Promise<void> {
    try {
      const health = await this.api.health();
      this.els.version.textContent = `v${health.version}`;
      this.showBanner(false);
    } catch (err) {
      this.noteFailure(err);
    }
    await this.refreshCatalog();
    await this.refetchStats();
    if (!this.state.live) await this.refetchSeries();
    this.syncStream();
    this.renderStaleness();
    this.timers.push(setInterval(() => this.renderStaleness(), 1000));
    this.timers.push(setInterval(() => void this.refreshCatalog(), this.catalogRefreshMs));
    document.addEventListener("visibilitychange", this.onVisibility);
  }

  dispose(): void {
    for (const timer of this.timers) clearInterval(timer);
    this.timers = [];
    if (this.chartTimer !== null) clearTimeout(this.chartTimer);
    this.stream?.stop();
    document.removeEventListener("visibilitychange", this.onVisibility);
  }

  // -- skeleton --------------------------------------------------------------

  private buildSkeleton(): void {
    const banner = h("div", { class: "banner hidden", id: "banner" });
    const version = h("span", { class: "version" });

    const expList = h("ul", { class: "exp-list", id: "exp-list" });
    const reportBtn = h("button", { id: "report-btn", disabled: "" }, "Generate report");
    const reportResult = h("div", { class: "report-result", id: "report-result" });
    const region1 = h(
      "section",
      { class: "region", id: "region-experiments" },
      h("h2", {}, "Experiments"),
      expList,
      reportBtn,
      reportResult,
    );

    const field = (
      id: string,
      name: string,
      placeholder: string,
    ): [HTMLLabelElement, HTMLInputElement, HTMLElement] => {
      const input = h("input", { type: "text", id, placeholder, autocomplete: "off" });
      const err = h("span", { class: "error", id: `${id}-error` });
      const label = h("label", { class: "field" }, h("span", { class: "name" }, name), input, err);
      return [label, input, err];
    };
    const [priceField, price, priceErr] = field("price", "price per kWh", "server default");
    const [carbonField, carbon, carbonErr] = field("carbon", "carbon g per kWh", "server default");
    const currency = h("input", { type: "text", id: "currency", placeholder: "server default" });
    const currencyField = h(
      "label",
      { class: "field" },
      h("span", { class: "name" }, "currency label"),
      currency,
      h("span", { class: "error" }),
    );
    const baseline = h("input", { type: "checkbox", id: "baseline" });
    const baselineField = h("label", { class: "check" }, baseline, "subtract idle baseline");
    const [windowField, windowInput, windowErr] = field(
      "window",
      `live window s (${WINDOW_MIN_S}..${WINDOW_MAX_S})`,
      String(this.state.windowS),
    );
    const [pointsField, points, pointsErr] = field(
      "points",
      `graph points (${POINTS_MIN}..${POINTS_MAX})`,
      String(this.state.maxPoints),
    );
    const live = h("input", { type: "checkbox", id: "live" });
    const liveField = h("label", { class: "check" }, live, "follow live");
    const plug = h("select", { id: "plug" });
    const plugField = h(
      "label",
      { class: "field" },
      h("span", { class: "name" }, "graphed plug"),
      plug,
    );
    const region2 = h(
      "section",
      { class: "region", id: "region-settings" },
      h("h2", {}, "Tariff & graph settings"),
      priceField,
      carbonField,
      currencyField,
      baselineField,
      h("hr", { style: "border:none;border-top:1px solid var(--line)" }),
      windowField,
      pointsField,
      liveField,
      plugField,
    );

    const staleBadge = h("span", { class: "badge off", id: "stats-stale" }, "live off");
    const tariffLine = h("div", { class: "tariff-line", id: "tariff-line" });
    const statsWrap = h("div", { class: "stats-wrap", id: "stats-wrap" });
    const statsNote = h("div", { class: "note", id: "stats-note" });
    const region3 = h(
      "section",
      { class: "region", id: "region-stats" },
      h("h2", {}, "Statistics ", staleBadge),
      tariffLine,
      statsWrap,
      statsNote,
    );

    const chartPower = h("div", { id: "chart-power" });
    const chartEnergy = h("div", { id: "chart-energy" });
    const region4 = h(
      "section",
      { class: "region", id: "region-graphs" },
      h("h2", {}, "Energy consumption"),
      h("div", { class: "chart-title" }, "power draw, W"),
      chartPower,
      h("div", { class: "chart-title" }, "cumulative energy, kWh"),
      chartEnergy,
    );

    this.root.textContent = "";
    this.root.appendChild(
      h(
        "div",
        { class: "dash" },
        h("header", { class: "dash-header" }, h("h1", {}, "plugmeter"), version),
        banner,
        h("main", { class: "grid" }, region1, region2, region3, region4),
      ),
    );

    this.els = {
      banner,
      version,
      expList,
      reportBtn,
      reportResult,
      price,
      priceErr,
      carbon,
      carbonErr,
      currency,
      baseline,
      window: windowInput,
      windowErr,
      points,
      pointsErr,
      live,
      plug,
      staleBadge,
      tariffLine,
      statsWrap,
      statsNote,
      chartPower,
      chartEnergy,
    };
    this.els.baseline.checked = this.state.baseline;
    this.els.live.checked = this.state.live;
    if (this.state.price !== null) this.els.price.value = String(this.state.price);
    if (this.state.carbon !== null) this.els.carbon.value = String(this.state.carbon);
    if (this.state.currency !== null) this.els.currency.value = this.state.currency;
    this.els.window.value = String(this.state.windowS);
    this.els.points.value = String(this.state.maxPoints);
    this.renderStats();
    this.renderCharts();
  }

  // -- region 2: inputs --------------------------------------------------------

  private wireInputs(): void {
    this.els.price.addEventListener("input", () => {
      this.tariffEdit(this.els.price, this.els.priceErr, (v) => (this.state.price = v));
    });
    this.els.carbon.addEventListener("input", () => {
      this.tariffEdit(this.els.carbon, this.els.carbonErr, (v) => (this.state.carbon = v));
    });
    this.els.currency.addEventListener("input", () => {
      const text = this.els.currency.value.trim();
      this.state.currency = text === "" ? null : text;
      this.pushState();
      void this.refetchStats();
    });
    this.els.baseline.addEventListener("change", () => {
      this.state.baseline = this.els.baseline.checked;
      this.pushState();
      void this.refetchStats();
    });
    this.els.window.addEventListener("input", () => {
      const check = checkIntInRange(this.els.window.value, WINDOW_MIN_S, WINDOW_MAX_S);
      if (!check.ok) {
        this.markInvalid(this.els.window, this.els.windowErr, check.reason);
        return;
      }
      this.markInvalid(this.els.window, this.els.windowErr, null);
      this.state.windowS = check.value;
      this.pushState();
      const latest = this.buffer.latestTs;
      if (latest !== null) this.buffer.trimTo(this.state.windowS * 1000, latest);
      this.scheduleChartRender();
    });
    this.els.points.addEventListener("input", () => {
      const check = checkIntInRange(this.els.points.value, POINTS_MIN, POINTS_MAX);
      if (!check.ok) {
        this.markInvalid(this.els.points, this.els.pointsErr, check.reason);
        return;
      }
      this.markInvalid(this.els.points, this.els.pointsErr, null);
      this.state.maxPoints = check.value;
      this.pushState();
      if (!this.state.live) void this.refetchSeries();
    });
    this.els.live.addEventListener("change", () => {
      this.state.live = this.els.live.checked;
      this.pushState();
      this.syncStream();
      if (!this.state.live) void this.refetchSeries();
      else this.scheduleChartRender();
      this.renderStaleness();
    });
    this.els.plug.addEventListener("change", () => {
      const value = this.els.plug.value;
      this.state.plug = value === "" ? null : value;
      this.pushState();
      this.buffer.clear();
      this.lastSampleArrival = null;
      this.restartStream();
      this.scheduleChartRender();
    });
    this.els.reportBtn.addEventListener("click", () => void this.generateReport());
  }

  private tariffEdit(
    input: HTMLInputElement,
    errEl: HTMLElement,
    apply: (value: number | null) => void,
  ): void {
    const text = input.value;
    if (text.trim() === "") {
      // cleared: back to the server's configured tariff
      this.markInvalid(input, errEl, null);
      apply(null);
      this.pushState();
      void this.refetchStats();
      return;
    }
    const check = checkNonNegative(text);
    if (!check.ok) {
      // invalid input never leaves the page
      this.markInvalid(input, errEl, check.reason);
      return;
    }
    this.markInvalid(input, errEl, null);
    apply(check.value);
    this.pushState();
    void this.refetchStats();
  }

  private markInvalid(input: HTMLInputElement, errEl: HTMLElement, reason: string | null): void {
    if (reason === null) {
      input.removeAttribute("aria-invalid");
      errEl.textContent = "";
    } else {
      input.setAttribute("aria-invalid", "true");
      errEl.textContent = reason;
    }
  }

  private pushState(): void {
    this.onStateChange?.(this.state);
  }

  // -- region 1: catalog and report --------------------------------------------

  async refreshCatalog(): Promise<void> {
    let payload: CatalogPayload;
    try {
      payload = await this.api.experiments();
      this.showBanner(false);
    } catch (err) {
      this.noteFailure(err);
      return;
    }
    const changed = JSON.stringify(payload) !== JSON.stringify(this.catalog);
    this.catalog = payload;
    if (changed) {
      this.renderCatalog();
      this.syncPlugOptions();
    }
    this.syncReportButton();
  }

  private renderCatalog(): void {
    const list = this.els.expList;
    list.textContent = "";
    if (this.catalog.experiments.length === 0) {
      list.appendChild(h("li", { class: "empty-note" }, "no experiments recorded yet"));
      return;
    }
    for (const exp of this.catalog.experiments) {
      const checkbox = h("input", { type: "checkbox", value: exp.experiment_id });
      checkbox.checked = this.state.experiments.includes(exp.experiment_id);
      checkbox.addEventListener("change", () => this.selectionChanged());
      const running = exp.sessions.some((s) => s.running);
      const meta = `${exp.sessions.length} session${exp.sessions.length === 1 ? "" : "s"}`;
      const label = h(
        "label",
        {},
        checkbox,
        h("span", {}, exp.experiment_id),
        h("span", { class: "meta" }, meta),
      );
      if (running) label.appendChild(h("span", { class: "running-dot", title: "session running" }));
      list.appendChild(h("li", {}, label));
    }
  }

  private selectionChanged(): void {
    const checked: string[] = [];
    this.els.expList.querySelectorAll<HTMLInputElement>("input[type=checkbox]").forEach((box) => {
      if (box.checked) checked.push(box.value);
    });
    this.state.experiments = checked;
    this.pushState();
    this.syncReportButton();
    void this.refetchStats();
    if (!this.state.live) void this.refetchSeries();
  }

  private syncReportButton(): void {
    this.els.reportBtn.disabled = this.state.experiments.length === 0;
  }

  private async generateReport(): Promise<void> {
    const result = this.els.reportResult;
    this.els.reportBtn.disabled = true;
    result.textContent = "generating…";
    try {
      const report = await this.api.report(this.state);
      result.textContent = "";
      const name = report.document_url.split("/").pop() ?? report.document_url;
      result.append("report ready: ", h("a", { href: report.document_url, target: "_blank" }, name));
      if (report.html_url) {
        result.append(" · ", h("a", { href: report.html_url, target: "_blank" }, "html"));
      }
      this.showBanner(false);
    } catch (err) {
      result.textContent = describeError(err);
    } finally {
      this.syncReportButton();
    }
  }

  // -- region 3: statistics -----------------------------------------------------

  async refetchStats(): Promise<void> {
    if (this.state.experiments.length === 0) {
      this.statsEpoch++;
      this.lastStats = null;
      this.renderStats();
      return;
    }
    const epoch = ++this.statsEpoch;
    try {
      const payload = await this.api.stats(this.state);
      if (epoch !== this.statsEpoch) return;
      this.lastStats = payload;
      this.els.statsNote.textContent = "";
      this.els.statsNote.classList.remove("error");
      this.showBanner(false);
      this.seedTariffInputs(payload);
      this.renderStats();
    } catch (err) {
      if (epoch !== this.statsEpoch) return;
      this.noteFailure(err);
      // the previous table stays visible; the note explains the problem
      this.els.statsNote.textContent = describeError(err);
      this.els.statsNote.classList.add("error");
    }
  }

  private seedTariffInputs(payload: StatsPayload): void {
    if (this.state.price === null && this.els.price.value === "") {
      this.els.price.placeholder = String(payload.tariff.price_per_kwh);
    }
    if (this.state.carbon === null && this.els.carbon.value === "") {
      this.els.carbon.placeholder = String(payload.tariff.carbon_g_per_kwh);
    }
    if (this.state.currency === null && this.els.currency.value === "") {
      this.els.currency.placeholder = payload.tariff.currency_label;
    }
  }

  private renderStats(): void {
    const wrap = this.els.statsWrap;
    wrap.textContent = "";
    const payload = this.lastStats;
    if (payload === null) {
      this.els.tariffLine.textContent = "";
      wrap.appendChild(h("div", { class: "empty-note" }, "select one or more experiments"));
      return;
    }
    this.els.tariffLine.textContent =
      `tariff: ${payload.tariff.price_per_kwh} ${payload.tariff.currency_label}/kWh, ` +
      `${payload.tariff.carbon_g_per_kwh} gCO2e/kWh` +
      (payload.baseline_mode === "per-plug" ? " · baseline subtracted" : "");

    const thead = h("thead", {}, h("tr", {}, ...STATS_HEADER.map((name) => h("th", {}, name))));
    const tbody = h("tbody", {});
    for (const entry of payload.experiments) {
      tbody.appendChild(rowOf(statsCells(entry.experiment_id, entry.session_count, entry.row), ""));
    }
    const totalSessions = payload.experiments.reduce((n, e) => n + e.session_count, 0);
    tbody.appendChild(rowOf(statsCells("aggregate", totalSessions, payload.aggregate), "aggregate"));
    wrap.appendChild(h("table", { class: "stats-table", id: "stats-table" }, thead, tbody));
  }

  // -- region 4: graphs ---------------------------------------------------------

  private restartStream(): void {
    this.stream?.stop();
    this.stream = null;
    this.syncStream();
  }

  syncStream(): void {
    const plug = this.state.plug;
    const want = this.state.live && plug !== null && !document.hidden;
    if (!want) {
      this.stream?.stop();
      this.renderStaleness();
      return;
    }
    const url = this.api.liveUrl(plug as string);
    if (this.stream !== null && this.stream.url === url) {
      // same feed: resume, replaying whatever was missed while stopped
      this.stream.start();
      this.renderStaleness();
      return;
    }
    this.stream?.stop();
    this.stream = this.makeStream(url, {
      onMessage: (msg) => this.onLiveMessage(msg),
      onStateChange: () => this.renderStaleness(),
    });
    this.stream.start();
    this.renderStaleness();
  }

  private onLiveMessage(msg: SseMessage): void {
    if (msg.kind !== "event" || msg.event !== "sample") return;
    const sample = parseLiveSample(msg.data);
    if (sample === null) return;
    if (this.buffer.append(sample) === "duplicate") return;
    this.lastSampleArrival = this.nowFn();
    this.buffer.trimTo(this.state.windowS * 1000, sample.ts);
    this.scheduleChartRender();
  }

  private scheduleChartRender(): void {
    if (this.chartTimer !== null) return;
    this.chartTimer = setTimeout(() => {
      this.chartTimer = null;
      this.renderCharts();
    }, 80);
  }

  renderCharts(): void {
    if (this.state.live) {
      const power = this.buffer.powerSegments();
      const energy = this.buffer.cumulativeSegments();
      renderChart(this.els.chartPower, {
        segments: power,
        yLabel: "W",
        title: "live power draw",
        stroke: "#0b6e4f",
        emptyText: this.state.plug === null ? "pick a plug to follow" : "waiting for live samples…",
      });
      renderChart(this.els.chartEnergy, {
        segments: energy,
        yLabel: "kWh",
        title: "device energy counter",
        stroke: "#1455b4",
        emptyText:
          power.length > 0 ? "plug reports no energy counter" : "waiting for live samples…",
      });
      return;
    }
    const series = this.lastSeries;
    const emptyText = "no session selected";
    renderChart(this.els.chartPower, {
      segments: series ? segmentsFromSeries(series.power.ts_ms, series.power.w, series.gap_ts_ms) : [],
      yLabel: "W",
      title: series ? `power draw, ${series.experiment_id}/${series.session_id}` : "power draw",
      stroke: "#0b6e4f",
      emptyText,
    });
    renderChart(this.els.chartEnergy, {
      segments: series
        ? segmentsFromSeries(series.cumulative.ts_ms, series.cumulative.kwh, series.gap_ts_ms)
        : [],
      yLabel: "kWh",
      title: series
        ? `cumulative energy, ${series.experiment_id}/${series.session_id}`
        : "cumulative energy",
      stroke: "#1455b4",
      emptyText,
    });
  }

  async refetchSeries(): Promise<void> {
    const target = this.seriesTarget();
    if (target === null) {
      this.seriesEpoch++;
      this.lastSeries = null;
      this.renderCharts();
      return;
    }
    const epoch = ++this.seriesEpoch;
    try {
      const payload = await this.api.series(target.experimentId, target.sessionId, {
        maxPoints: this.state.maxPoints,
      });
      if (epoch !== this.seriesEpoch) return;
      this.lastSeries = payload;
      this.showBanner(false);
      this.renderCharts();
    } catch (err) {
      if (epoch !== this.seriesEpoch) return;
      this.noteFailure(err);
    }
  }

  private seriesTarget(): { experimentId: string; sessionId: string } | null {
    if (this.state.session !== null) {
      const slash = this.state.session.indexOf("/");
      return {
        experimentId: this.state.session.slice(0, slash),
        sessionId: this.state.session.slice(slash + 1),
      };
    }
    // newest session across the selection
    let best: { experimentId: string; sessionId: string; startTs: number } | null = null;
    for (const exp of this.catalog.experiments) {
      if (!this.state.experiments.includes(exp.experiment_id)) continue;
      for (const session of exp.sessions) {
        if (best === null || session.start_ts > best.startTs) {
          best = {
            experimentId: exp.experiment_id,
            sessionId: session.session_id,
            startTs: session.start_ts,
          };
        }
      }
    }
    return best && { experimentId: best.experimentId, sessionId: best.sessionId };
  }

  private syncPlugOptions(): void {
    const plugs = new Set<string>();
    for (const exp of this.catalog.experiments) {
      for (const session of exp.sessions) plugs.add(session.plug_id);
    }
    if (this.state.plug !== null) plugs.add(this.state.plug);
    const sorted = [...plugs].sort();
    const select = this.els.plug;
    select.textContent = "";
    select.appendChild(h("option", { value: "" }, "(none)"));
    for (const plug of sorted) select.appendChild(h("option", { value: plug }, plug));
    if (this.state.plug === null && sorted.length > 0) {
      // follow the first known plug by default so the live view works out of the box
      this.state.plug = sorted[0]!;
      this.pushState();
    }
    select.value = this.state.plug ?? "";
    this.syncStream();
  }

  // -- shared chrome -------------------------------------------------------------

  renderStaleness(): void {
    const badge = this.els.staleBadge;
    if (!this.state.live || this.state.plug === null) {
      badge.textContent = "live off";
      badge.className = "badge off";
      return;
    }
    if (this.stream === null || this.stream.state !== "open" || this.lastSampleArrival === null) {
      badge.textContent = this.stream?.state === "retrying" ? "reconnecting…" : "connecting…";
      badge.className = "badge off";
      return;
    }
    const ageMs = this.nowFn() - this.lastSampleArrival;
    if (ageMs > 5000) {
      badge.textContent = `stale, ${Math.round(ageMs / 1000)} s`;
      badge.className = "badge stale";
    } else {
      badge.textContent = "live";
      badge.className = "badge";
    }
  }

  private showBanner(show: boolean): void {
    this.els.banner.classList.toggle("hidden", !show);
    if (show) {
      this.els.banner.textContent = "API unreachable; showing the last data received";
    }
  }

  private noteFailure(err: unknown): void {
    if (err instanceof ApiError) return; // the API answered; handled where thrown
    this.showBanner(true);
  }
}

function rowOf(cells: string[], cls: string): HTMLTableRowElement {
  const row = h("tr", cls ? { class: cls } : {});
  for (const cell of cells) row.appendChild(h("td", {}, cell));
  return row;
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return err.hint ? `${err.message} (${err.hint})` : err.message;
  }
  return err instanceof Error ? err.message : String(err);
}
