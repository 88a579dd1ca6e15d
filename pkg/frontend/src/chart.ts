// Minimal SVG line chart. Gaps arrive as separate segments and stay separate
// polylines, so missing stretches render as holes in the line instead of a
// straight bridge. Layout mirrors the charts embedded in generated reports.

import type { Segment } from "./live";
import { utcIso } from "./format";

const W = 640;
const H = 220;
const PAD_L = 56;
const PAD_R = 12;
const PAD_T = 12;
const PAD_B = 30;
const SVG_NS = "http://www.w3.org/2000/svg";

export interface ChartOptions {
  segments: Segment[];
  yLabel: string;
  title: string;
  stroke: string;
  emptyText?: string;
}

function axisNum(value: number): string {
  const s = value.toFixed(3).replace(/0+$/, "").replace(/\.$/, "");
  return s === "" || s === "-" ? "0" : s;
}

function el(name: string, attrs: Record<string, string>, text?: string): SVGElement {
  const node = document.createElementNS(SVG_NS, name);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderChart(container: HTMLElement, opts: ChartOptions): void {
  container.textContent = "";
  const svg = el("svg", {
    viewBox: `0 0 ${W} ${H}`,
    role: "img",
    class: "chart",
    preserveAspectRatio: "xMidYMid meet",
  });
  svg.appendChild(el("title", {}, opts.title));

  const points = opts.segments.reduce((n, s) => n + s.ts.length, 0);
  if (points === 0) {
    svg.appendChild(
      el(
        "text",
        { x: String(W / 2), y: String(H / 2), "text-anchor": "middle", class: "chart-empty" },
        opts.emptyText ?? "no data",
      ),
    );
    container.appendChild(svg);
    return;
  }

  let tLo = Infinity;
  let tHi = -Infinity;
  let yLo = Infinity;
  let yHi = -Infinity;
  for (const seg of opts.segments) {
    for (const t of seg.ts) {
      if (t < tLo) tLo = t;
      if (t > tHi) tHi = t;
    }
    for (const v of seg.v) {
      if (v < yLo) yLo = v;
      if (v > yHi) yHi = v;
    }
  }
  if (tHi === tLo) tHi = tLo + 1;
  if (yHi === yLo) yHi = yLo + 1;

  const sx = (t: number) => PAD_L + ((t - tLo) / (tHi - tLo)) * (W - PAD_L - PAD_R);
  const sy = (v: number) => H - PAD_B - ((v - yLo) / (yHi - yLo)) * (H - PAD_T - PAD_B);

  svg.appendChild(
    el("rect", {
      x: String(PAD_L),
      y: String(PAD_T),
      width: String(W - PAD_L - PAD_R),
      height: String(H - PAD_T - PAD_B),
      fill: "none",
      stroke: "#999",
      "stroke-width": "1",
    }),
  );
  for (const seg of opts.segments) {
    if (seg.ts.length === 0) continue;
    const coords = seg.ts.map((t, i) => `${sx(t).toFixed(2)},${sy(seg.v[i]!).toFixed(2)}`);
    if (seg.ts.length === 1) {
      svg.appendChild(
        el("circle", { cx: sx(seg.ts[0]!).toFixed(2), cy: sy(seg.v[0]!).toFixed(2), r: "2", fill: opts.stroke }),
      );
    } else {
      svg.appendChild(
        el("polyline", {
          fill: "none",
          stroke: opts.stroke,
          "stroke-width": "1.5",
          points: coords.join(" "),
        }),
      );
    }
  }
  const label = { "font-size": "10", "font-family": "monospace" };
  svg.appendChild(el("text", { ...label, x: String(PAD_L - 6), y: String(PAD_T + 10), "text-anchor": "end" }, axisNum(yHi)));
  svg.appendChild(el("text", { ...label, x: String(PAD_L - 6), y: String(H - PAD_B), "text-anchor": "end" }, axisNum(yLo)));
  svg.appendChild(el("text", { ...label, x: String(PAD_L), y: String(H - 8), "text-anchor": "start" }, utcIso(tLo)));
  svg.appendChild(el("text", { ...label, x: String(W - PAD_R), y: String(H - 8), "text-anchor": "end" }, utcIso(tHi)));
  svg.appendChild(
    el(
      "text",
      { ...label, x: "14", y: String(PAD_T + 10), transform: `rotate(90 14 ${PAD_T + 10})` },
      opts.yLabel,
    ),
  );
  container.appendChild(svg);
}
