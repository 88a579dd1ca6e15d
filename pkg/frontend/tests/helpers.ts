// Shared test scaffolding: a scripted fetch that serves canned payloads by
// pathname and records every request, plus a live stream double that tests
// push messages through by hand.

import type { FetchLike } from "../src/api";
import { LiveStream, type LiveStreamOptions, type SseMessage } from "../src/sse";

export function jsonResponse(obj: unknown, status = 200): Response {
  return new Response(JSON.stringify(obj), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export type RouteHandler = (url: URL, init?: RequestInit) => Response | Promise<Response>;

export interface StubFetch {
  fetch: FetchLike;
  calls: string[];
}

export function stubFetch(routes: Record<string, RouteHandler>): StubFetch {
  const calls: string[] = [];
  const fetch: FetchLike = async (input, init) => {
    const url = new URL(input, "http://stub.test");
    calls.push(url.pathname + url.search);
    const handler = routes[url.pathname];
    if (handler === undefined) {
      return jsonResponse({ detail: `no stub for ${url.pathname}` }, 404);
    }
    return handler(url, init);
  };
  return { fetch, calls };
}

export class FakeStream extends LiveStream {
  started = 0;
  stopped = 0;
  private readonly deliver: (msg: SseMessage) => void;

  constructor(url: string, opts: LiveStreamOptions) {
    super(url, opts);
    this.deliver = opts.onMessage;
  }

  override start(): void {
    if (this.state === "open") return; // the real stream ignores repeated starts
    this.started++;
    this.state = "open";
  }

  override stop(): void {
    if (this.state === "stopped") return;
    this.stopped++;
    this.state = "stopped";
  }

  emit(msg: SseMessage): void {
    if (msg.kind === "event" && msg.id !== null) this.lastEventId = msg.id;
    this.deliver(msg);
  }

  sample(line: string, seq: number): void {
    this.emit({ kind: "event", event: "sample", data: line, id: String(seq) });
  }
}

export function sampleLine(
  ts: number,
  seq: number,
  plug: string,
  w: number,
  wh?: number,
  flags?: string[],
): string {
  const obj: Record<string, unknown> = { ts, seq, plug, w };
  if (wh !== undefined) obj.wh = wh;
  if (flags !== undefined && flags.length > 0) obj.flags = flags;
  return JSON.stringify(obj);
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export async function until(check: () => boolean, timeoutMs = 5000, stepMs = 25): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!check()) {
    if (Date.now() > deadline) throw new Error("condition not met in time");
    await sleep(stepMs);
  }
}
