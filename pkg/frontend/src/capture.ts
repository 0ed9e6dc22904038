// Behavioral signal capture on a live page.
//
// Copy, selection (highlight), and click listeners fire directly; cursor
// hovers and viewport dwells run per-block stay timers that only emit once
// a stay reaches the 2-second activation threshold. Timers pause while the
// tab is hidden. Events are batched and flushed once a second.

import type { SignalEventPayload, SignalKind } from "./types.js";

const MIN_STAY_MS = 2000;
const BATCH_INTERVAL_MS = 1000;
const SELECTION_CLICK_WINDOW_MS = 500;

export interface CaptureOptions {
  now?: () => number;
  batchIntervalMs?: number;
  minStayMs?: number;
  log?: (message: string) => void;
}

interface Stay {
  startedAt: number; // first entry, becomes the event timestamp
  accumulatedMs: number;
  activeSince: number | null; // null while the tab is hidden
}

export class SignalCapture {
  private now: () => number;
  private batchIntervalMs: number;
  private minStayMs: number;
  private log: (message: string) => void;

  private queue: SignalEventPayload[] = [];
  private hovers = new Map<string, Stay>();
  private dwells = new Map<string, Stay>();
  private hidden = false;
  private lastSelection: { blockId: string; at: number; length: number } | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;
  private cleanup: (() => void)[] = [];

  constructor(
    private doc: Document,
    private pageId: string,
    private blockOf: (node: Node | null) => string | null,
    private sink: (events: SignalEventPayload[]) => void,
    options: CaptureOptions = {},
  ) {
    this.now = options.now ?? Date.now;
    this.batchIntervalMs = options.batchIntervalMs ?? BATCH_INTERVAL_MS;
    this.minStayMs = options.minStayMs ?? MIN_STAY_MS;
    this.log = options.log ?? ((m) => console.warn(`[capture] ${m}`));
  }

  start(): void {
    const listen = (type: string, handler: (event: Event) => void) => {
      this.doc.addEventListener(type, handler, true);
      this.cleanup.push(() => this.doc.removeEventListener(type, handler, true));
    };
    listen("copy", () => this.onCopy());
    listen("mouseup", () => this.onSelectionEnd());
    listen("click", (event) => this.onClick(event));
    listen("mouseover", (event) => {
      const blockId = this.blockOf(event.target as Node);
      if (blockId) this.cursorEntered(blockId);
    });
    listen("mouseout", (event) => {
      const blockId = this.blockOf(event.target as Node);
      const nextBlock = this.blockOf((event as MouseEvent).relatedTarget as Node | null);
      if (blockId && blockId !== nextBlock) this.cursorLeft(blockId);
    });
    listen("visibilitychange", () => {
      this.setHidden(this.doc.visibilityState === "hidden");
    });
    this.timer = setInterval(() => this.flush(), this.batchIntervalMs);
  }

  stop(): void {
    for (const blockId of [...this.hovers.keys()]) this.cursorLeft(blockId);
    for (const blockId of [...this.dwells.keys()]) this.blockHidden(blockId);
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
    for (const undo of this.cleanup.splice(0)) undo();
    this.flush();
  }

  // --- direct gestures -----------------------------------------------------

  private selectionInfo(): { blockId: string | null; length: number } {
    const selection = this.doc.defaultView?.getSelection?.() ?? null;
    const text = selection?.toString() ?? "";
    const anchor = selection?.anchorNode ?? null;
    return { blockId: this.blockOf(anchor), length: text.length };
  }

  private onCopy(): void {
    const { blockId } = this.selectionInfo();
    if (!blockId) {
      this.log("copy outside any known block; dropped");
      return;
    }
    this.enqueue({ kind: "copy", page_id: this.pageId, block_id: blockId, timestamp: this.now() });
  }

  private onSelectionEnd(): void {
    const { blockId, length } = this.selectionInfo();
    if (!blockId || length === 0) return;
    const at = this.now();
    this.lastSelection = { blockId, at, length };
    this.enqueue({
      kind: "highlight",
      page_id: this.pageId,
      block_id: blockId,
      timestamp: at,
      text_len: length,
    });
  }

  private onClick(event: Event): void {
    const blockId = this.blockOf(event.target as Node);
    if (!blockId) {
      this.log("click outside any known block; dropped");
      return;
    }
    const at = this.now();
    const linked =
      this.lastSelection !== null &&
      this.lastSelection.blockId === blockId &&
      at - this.lastSelection.at <= SELECTION_CLICK_WINDOW_MS;
    this.enqueue({
      kind: "click",
      page_id: this.pageId,
      block_id: blockId,
      timestamp: at,
      highlight_linked: linked || undefined,
    });
  }

  // --- stay timers (cursor hovers, viewport dwells) -------------------------

  cursorEntered(blockId: string): void {
    this.openStay(this.hovers, blockId);
  }

  cursorLeft(blockId: string): void {
    this.closeStay(this.hovers, blockId, "hover");
  }

  blockShown(blockId: string): void {
    this.openStay(this.dwells, blockId);
  }

  blockHidden(blockId: string): void {
    this.closeStay(this.dwells, blockId, "dwell");
  }

  private openStay(stays: Map<string, Stay>, blockId: string): void {
    if (stays.has(blockId)) return; // already inside
    const at = this.now();
    stays.set(blockId, {
      startedAt: at,
      accumulatedMs: 0,
      activeSince: this.hidden ? null : at,
    });
  }

  private closeStay(stays: Map<string, Stay>, blockId: string, kind: SignalKind): void {
    const stay = stays.get(blockId);
    if (!stay) return;
    stays.delete(blockId);
    const elapsed =
      stay.accumulatedMs + (stay.activeSince !== null ? this.now() - stay.activeSince : 0);
    if (elapsed < this.minStayMs) return;
    this.enqueue({
      kind,
      page_id: this.pageId,
      block_id: blockId,
      timestamp: stay.startedAt,
      duration_s: elapsed / 1000,
    });
  }

  setHidden(hidden: boolean): void {
    if (hidden === this.hidden) return;
    this.hidden = hidden;
    const at = this.now();
    for (const stays of [this.hovers, this.dwells]) {
      for (const stay of stays.values()) {
        if (hidden && stay.activeSince !== null) {
          stay.accumulatedMs += at - stay.activeSince;
          stay.activeSince = null;
        } else if (!hidden && stay.activeSince === null) {
          stay.activeSince = at;
        }
      }
    }
  }

  // --- batching ---------------------------------------------------------------

  private enqueue(event: SignalEventPayload): void {
    this.queue.push(event);
  }

  flush(): void {
    if (this.queue.length === 0) return;
    const batch = this.queue.splice(0);
    try {
      this.sink(batch);
    } catch (error) {
      // fire-and-forget: put the batch back for the next tick
      this.queue.unshift(...batch);
      this.log(`flush failed, will retry: ${String(error)}`);
    }
  }

  pendingCount(): number {
    return this.queue.length;
  }
}

/** Wire an IntersectionObserver to the dwell hooks when the host supports it. */
export function observeDwells(
  capture: SignalCapture,
  blocks: Map<Element, string>,
  win: Window,
): () => void {
  const IO = (win as Window & typeof globalThis).IntersectionObserver;
  if (typeof IO !== "function") return () => undefined;
  const observer = new IO((entries) => {
    for (const entry of entries) {
      const blockId = blocks.get(entry.target);
      if (!blockId) continue;
      if (entry.isIntersecting) capture.blockShown(blockId);
      else capture.blockHidden(blockId);
    }
  });
  for (const element of blocks.keys()) observer.observe(element);
  return () => observer.disconnect();
}
