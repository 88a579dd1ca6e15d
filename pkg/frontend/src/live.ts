// Chart-side buffer for one plug's live feed. Replays after a reconnect are
// dropped by sequence number, a session rollover (sequence restarts at 1)
// starts a new visual segment, and "gap-after" flags break the line exactly
// like gap_ts_ms does in historical series.

import type { LiveSample } from "./types";

export interface LivePoint {
  ts: number;
  w: number;
  wh: number | null;
  gapAfter: boolean;
}

export interface Segment {
  ts: number[];
  v: number[];
}

export type AppendResult = "appended" | "duplicate" | "restarted";

export class LiveBuffer {
  private points: LivePoint[] = [];
  private lastSeq: number | null = null;
  private lastTs: number | null = null;
  readonly maxPoints: number;

  constructor(maxPoints = 7200) {
    this.maxPoints = maxPoints;
  }

  get size(): number {
    return this.points.length;
  }

  get latestTs(): number | null {
    return this.points.length > 0 ? this.points[this.points.length - 1]!.ts : null;
  }

  get latest(): LivePoint | null {
    return this.points.length > 0 ? this.points[this.points.length - 1]! : null;
  }

  append(sample: LiveSample): AppendResult {
    let result: AppendResult = "appended";
    if (this.lastSeq !== null && sample.seq <= this.lastSeq) {
      if (this.lastTs !== null && sample.ts <= this.lastTs) {
        // replay overlap after a resume
        return "duplicate";
      }
      // sequence went backwards while time moved on: a new session took over
      // the stream, so the line breaks here instead of connecting across
      const prev = this.points[this.points.length - 1];
      if (prev) prev.gapAfter = true;
      result = "restarted";
    }
    this.points.push({
      ts: sample.ts,
      w: sample.w,
      wh: sample.wh ?? null,
      gapAfter: sample.flags?.includes("gap-after") ?? false,
    });
    this.lastSeq = sample.seq;
    this.lastTs = sample.ts;
    if (this.points.length > this.maxPoints) {
      this.points.splice(0, this.points.length - this.maxPoints);
    }
    return result;
  }

  // drop points older than the window; the newest point always survives so
  // a slow feed still shows its current reading
  trimTo(windowMs: number, nowTs: number): void {
    const cutoff = nowTs - windowMs;
    let first = 0;
    while (first < this.points.length - 1 && this.points[first]!.ts < cutoff) first++;
    if (first > 0) this.points.splice(0, first);
  }

  clear(): void {
    this.points = [];
    this.lastSeq = null;
    this.lastTs = null;
  }

  powerSegments(): Segment[] {
    return segmentsOf(this.points, (p) => p.w);
  }

  // device counter in kWh; points without a counter are skipped, which keeps
  // this a pure unit conversion of server-reported values
  cumulativeSegments(): Segment[] {
    return segmentsOf(
      this.points.filter((p) => p.wh !== null),
      (p) => (p.wh as number) / 1000,
    );
  }
}

function segmentsOf(points: LivePoint[], value: (p: LivePoint) => number): Segment[] {
  const out: Segment[] = [];
  let current: Segment = { ts: [], v: [] };
  for (const p of points) {
    current.ts.push(p.ts);
    current.v.push(value(p));
    if (p.gapAfter) {
      out.push(current);
      current = { ts: [], v: [] };
    }
  }
  if (current.ts.length > 0) out.push(current);
  return out;
}

// historical series arrive pre-downsampled with gap timestamps alongside;
// the same segment shape feeds the chart either way
export function segmentsFromSeries(tsMs: number[], values: number[], gapTsMs: number[]): Segment[] {
  const gaps = new Set(gapTsMs);
  const out: Segment[] = [];
  let current: Segment = { ts: [], v: [] };
  for (let i = 0; i < tsMs.length; i++) {
    current.ts.push(tsMs[i]!);
    current.v.push(values[i]!);
    if (gaps.has(tsMs[i]!)) {
      out.push(current);
      current = { ts: [], v: [] };
    }
  }
  if (current.ts.length > 0) out.push(current);
  return out;
}
