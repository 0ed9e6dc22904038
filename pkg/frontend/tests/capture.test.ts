// Signal capture fidelity: scripted DOM interactions must produce engine
// event payloads of the right kind and duration.

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { SignalCapture } from "../src/capture.js";
import type { SignalEventPayload } from "../src/types.js";

let sink: SignalEventPayload[];
let capture: SignalCapture;
let blockA: HTMLElement;
let blockB: HTMLElement;
let orphan: HTMLElement;
let logs: string[];

function drain(): SignalEventPayload[] {
  capture.flush();
  const out = [...sink];
  sink.length = 0;
  return out;
}

function selectChars(element: HTMLElement, count: number): void {
  const textNode = element.firstChild as Text;
  const range = document.createRange();
  range.setStart(textNode, 0);
  range.setEnd(textNode, count);
  const selection = window.getSelection()!;
  selection.removeAllRanges();
  selection.addRange(range);
}

function clearSelection(): void {
  window.getSelection()?.removeAllRanges();
}

function mouse(element: HTMLElement, type: string, related?: HTMLElement): void {
  element.dispatchEvent(
    new MouseEvent(type, { bubbles: true, relatedTarget: related ?? null }),
  );
}

beforeEach(() => {
  vi.useFakeTimers();
  vi.setSystemTime(1_700_000_000_000);
  document.body.innerHTML =
    '<p id="a">Splide weighs in around 29kB minified while Slick needs jQuery</p>' +
    '<p id="b">Swiper leans on hardware accelerated transitions</p>' +
    '<p id="orphan">not a tracked block</p>';
  blockA = document.getElementById("a")!;
  blockB = document.getElementById("b")!;
  orphan = document.getElementById("orphan")!;
  const map = new Map<Element, string>([
    [blockA, "blk-a"],
    [blockB, "blk-b"],
  ]);
  const blockOf = (node: Node | null): string | null => {
    let el: Element | null = node instanceof Element ? node : node?.parentElement ?? null;
    while (el) {
      const hit = map.get(el);
      if (hit) return hit;
      el = el.parentElement;
    }
    return null;
  };
  sink = [];
  logs = [];
  capture = new SignalCapture(
    document,
    "p1",
    blockOf,
    (events) => sink.push(...events),
    { log: (m) => logs.push(m) },
  );
  capture.start();
});

afterEach(() => {
  capture.stop();
  clearSelection();
  vi.useRealTimers();
});

describe("selection and copy", () => {
  it("a 12-character selection emits highlight with text_len 12", () => {
    selectChars(blockA, 12);
    mouse(blockA, "mouseup");
    const [event] = drain();
    expect(event).toMatchObject({
      kind: "highlight",
      page_id: "p1",
      block_id: "blk-a",
      text_len: 12,
    });
  });

  it("copy within a block emits a copy event", () => {
    selectChars(blockA, 20);
    blockA.dispatchEvent(new Event("copy", { bubbles: true }));
    const [event] = drain();
    expect(event).toMatchObject({ kind: "copy", block_id: "blk-a" });
  });

  it("copy with no resolvable block is dropped with a log line", () => {
    clearSelection();
    orphan.dispatchEvent(new Event("copy", { bubbles: true }));
    expect(drain()).toEqual([]);
    expect(logs.some((m) => m.includes("dropped"))).toBe(true);
  });
});

describe("clicks", () => {
  it("a click concluding a selection is tagged highlight_linked", () => {
    selectChars(blockA, 12);
    mouse(blockA, "mouseup");
    vi.advanceTimersByTime(200);
    mouse(blockA, "click");
    const events = drain();
    const click = events.find((e) => e.kind === "click")!;
    expect(click.highlight_linked).toBe(true);
  });

  it("a click long after the selection is not tagged", () => {
    selectChars(blockA, 12);
    mouse(blockA, "mouseup");
    clearSelection();
    vi.advanceTimersByTime(3_000);
    mouse(blockA, "click");
    const click = drain().find((e) => e.kind === "click")!;
    expect(click.highlight_linked).toBeUndefined();
  });

  it("a click on another block is not tagged", () => {
    selectChars(blockA, 12);
    mouse(blockA, "mouseup");
    clearSelection();
    vi.advanceTimersByTime(100);
    mouse(blockB, "click");
    const click = drain().find((e) => e.kind === "click")!;
    expect(click.highlight_linked).toBeUndefined();
  });
});

describe("cursor hovers", () => {
  it("a 6-second stay emits hover with duration within 0.2s", () => {
    const entered = Date.now();
    mouse(blockA, "mouseover");
    vi.advanceTimersByTime(6_000);
    mouse(blockA, "mouseout", orphan);
    const hover = drain().find((e) => e.kind === "hover")!;
    expect(hover.block_id).toBe("blk-a");
    expect(hover.timestamp).toBe(entered);
    expect(Math.abs(hover.duration_s! - 6)).toBeLessThanOrEqual(0.2);
  });

  it("sub-2-second stays emit nothing", () => {
    mouse(blockA, "mouseover");
    vi.advanceTimersByTime(1_500);
    mouse(blockA, "mouseout", orphan);
    expect(drain().filter((e) => e.kind === "hover")).toEqual([]);
  });

  it("moving within the same block does not restart the stay", () => {
    mouse(blockA, "mouseover");
    vi.advanceTimersByTime(3_000);
    // mouseout whose relatedTarget is still inside the block: ignored
    mouse(blockA, "mouseout", blockA);
    vi.advanceTimersByTime(3_000);
    mouse(blockA, "mouseout", orphan);
    const hover = drain().find((e) => e.kind === "hover")!;
    expect(Math.abs(hover.duration_s! - 6)).toBeLessThanOrEqual(0.2);
  });

  it("re-entering starts a fresh triggering", () => {
    mouse(blockA, "mouseover");
    vi.advanceTimersByTime(2_500);
    mouse(blockA, "mouseout", orphan);
    mouse(blockA, "mouseover");
    vi.advanceTimersByTime(2_500);
    mouse(blockA, "mouseout", orphan);
    const hovers = drain().filter((e) => e.kind === "hover");
    expect(hovers).toHaveLength(2);
  });
});

describe("viewport dwells", () => {
  it("a scrolled-in block dwelling 4 seconds emits dwell within 0.2s", () => {
    const shown = Date.now();
    capture.blockShown("blk-b");
    vi.advanceTimersByTime(4_000);
    capture.blockHidden("blk-b");
    const dwell = drain().find((e) => e.kind === "dwell")!;
    expect(dwell.block_id).toBe("blk-b");
    expect(dwell.timestamp).toBe(shown);
    expect(Math.abs(dwell.duration_s! - 4)).toBeLessThanOrEqual(0.2);
  });

  it("dwell timers pause while the tab is hidden", () => {
    capture.blockShown("blk-a");
    vi.advanceTimersByTime(1_000);
    capture.setHidden(true);
    vi.advanceTimersByTime(60_000); // user is away
    capture.setHidden(false);
    vi.advanceTimersByTime(1_500);
    capture.blockHidden("blk-a");
    const dwell = drain().find((e) => e.kind === "dwell")!;
    expect(Math.abs(dwell.duration_s! - 2.5)).toBeLessThanOrEqual(0.2);
  });

  it("a stay fully under the threshold after pausing emits nothing", () => {
    capture.blockShown("blk-a");
    vi.advanceTimersByTime(500);
    capture.setHidden(true);
    vi.advanceTimersByTime(30_000);
    capture.setHidden(false);
    vi.advanceTimersByTime(500);
    capture.blockHidden("blk-a");
    expect(drain()).toEqual([]);
  });
});

describe("batching", () => {
  it("events flush on the one-second interval", () => {
    const batches: SignalEventPayload[][] = [];
    const local = new SignalCapture(
      document,
      "p1",
      () => "blk-a",
      (events) => batches.push(events),
    );
    local.start();
    mouse(blockA, "click");
    mouse(blockB, "click");
    expect(batches).toHaveLength(0); // nothing until the tick
    vi.advanceTimersByTime(1_000);
    expect(batches).toHaveLength(1);
    expect(batches[0]).toHaveLength(2);
    local.stop();
  });

  it("a failed flush retries with the same events", () => {
    let failures = 1;
    const batches: SignalEventPayload[][] = [];
    const local = new SignalCapture(
      document,
      "p1",
      () => "blk-a",
      (events) => {
        if (failures-- > 0) throw new Error("network down");
        batches.push(events);
      },
      { log: () => undefined },
    );
    local.start();
    mouse(blockA, "click");
    vi.advanceTimersByTime(1_000); // fails, retained
    expect(batches).toHaveLength(0);
    expect(local.pendingCount()).toBe(1);
    vi.advanceTimersByTime(1_000); // retried
    expect(batches).toHaveLength(1);
    local.stop();
  });
});
