import { describe, expect, it } from "vitest";
import { LiveBuffer, segmentsFromSeries } from "../src/live";
import type { LiveSample } from "../src/types";

function s(ts: number, seq: number, w: number, extra: Partial<LiveSample> = {}): LiveSample {
  return { ts, seq, plug: "p1", w, ...extra };
}

describe("LiveBuffer", () => {
  it("appends in order and exposes one segment", () => {
    const buffer = new LiveBuffer();
    expect(buffer.append(s(1000, 1, 40))).toBe("appended");
    expect(buffer.append(s(2000, 2, 41))).toBe("appended");
    const segments = buffer.powerSegments();
    expect(segments).toHaveLength(1);
    expect(segments[0]!.ts).toEqual([1000, 2000]);
    expect(segments[0]!.v).toEqual([40, 41]);
  });

  it("drops replayed samples by sequence number", () => {
    const buffer = new LiveBuffer();
    buffer.append(s(1000, 1, 40));
    buffer.append(s(2000, 2, 41));
    // reconnect replays the same samples
    expect(buffer.append(s(1000, 1, 40))).toBe("duplicate");
    expect(buffer.append(s(2000, 2, 41))).toBe("duplicate");
    expect(buffer.size).toBe(2);
    expect(buffer.append(s(3000, 3, 42))).toBe("appended");
    expect(buffer.size).toBe(3);
  });

  it("treats a sequence restart with advancing time as a new stream", () => {
    const buffer = new LiveBuffer();
    buffer.append(s(1000, 41, 40));
    buffer.append(s(2000, 42, 41));
    // a new session took over: seq restarts at 1 but time moved on
    expect(buffer.append(s(9000, 1, 50))).toBe("restarted");
    const segments = buffer.powerSegments();
    expect(segments).toHaveLength(2);
    expect(segments[0]!.ts).toEqual([1000, 2000]);
    expect(segments[1]!.ts).toEqual([9000]);
  });

  it("splits segments at gap-after flags", () => {
    const buffer = new LiveBuffer();
    buffer.append(s(1000, 1, 40));
    buffer.append(s(2000, 2, 41, { flags: ["gap-after"] }));
    buffer.append(s(9000, 3, 43));
    const segments = buffer.powerSegments();
    expect(segments).toHaveLength(2);
    expect(segments[0]!.ts).toEqual([1000, 2000]);
    expect(segments[1]!.ts).toEqual([9000]);
  });

  it("trims to the window but keeps the newest point", () => {
    const buffer = new LiveBuffer();
    for (let i = 0; i < 10; i++) buffer.append(s(1000 * (i + 1), i + 1, 40));
    buffer.trimTo(3000, 10_000);
    expect(buffer.size).toBe(4); // 7000..10000
    buffer.trimTo(1, 50_000);
    expect(buffer.size).toBe(1);
    expect(buffer.latestTs).toBe(10_000);
  });

  it("caps retained points", () => {
    const buffer = new LiveBuffer(5);
    for (let i = 0; i < 12; i++) buffer.append(s(1000 * (i + 1), i + 1, 40));
    expect(buffer.size).toBe(5);
    expect(buffer.latestTs).toBe(12_000);
  });

  it("converts the device counter to kWh and skips samples without one", () => {
    const buffer = new LiveBuffer();
    buffer.append(s(1000, 1, 40, { wh: 1500 }));
    buffer.append(s(2000, 2, 41));
    buffer.append(s(3000, 3, 42, { wh: 1540 }));
    const segments = buffer.cumulativeSegments();
    expect(segments).toHaveLength(1);
    expect(segments[0]!.ts).toEqual([1000, 3000]);
    expect(segments[0]!.v).toEqual([1.5, 1.54]);
  });

  it("keeps the cumulative curve non-decreasing when the feed is", () => {
    const buffer = new LiveBuffer();
    let wh = 100;
    for (let i = 0; i < 50; i++) {
      wh += Math.abs(Math.sin(i)) * 3;
      buffer.append(s(1000 * (i + 1), i + 1, 40, { wh }));
    }
    for (const segment of buffer.cumulativeSegments()) {
      for (let i = 1; i < segment.v.length; i++) {
        expect(segment.v[i]!).toBeGreaterThanOrEqual(segment.v[i - 1]!);
      }
    }
  });
});

describe("segmentsFromSeries", () => {
  it("breaks historical series at gap timestamps", () => {
    const segments = segmentsFromSeries([1, 2, 3, 4], [10, 11, 12, 13], [2]);
    expect(segments).toHaveLength(2);
    expect(segments[0]!.ts).toEqual([1, 2]);
    expect(segments[1]!.ts).toEqual([3, 4]);
  });

  it("returns one segment when there are no gaps", () => {
    expect(segmentsFromSeries([1, 2], [5, 6], [])).toHaveLength(1);
  });

  it("returns nothing for an empty series", () => {
    expect(segmentsFromSeries([], [], [])).toEqual([]);
  });
});
