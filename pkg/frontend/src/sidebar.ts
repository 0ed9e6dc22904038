// Sidebar bootstrap: ingest the current page, wire signal capture to the
// engine, and keep the panel in sync with pushed state diffs.

import { EngineClient } from "./client.js";
import { SignalCapture, observeDwells } from "./capture.js";
import { attachSelectionPopup, renderListView, renderTableView } from "./views.js";
import type { ActionRequest, StateSnapshot } from "./types.js";

const LEAF_SELECTOR = "p, li, pre, h1, h2, h3, h4, h5, h6, tr, dt, dd";

/** Candidate leaf block elements in document order; mirrors how the engine
 * segments pages closely enough to zip with its block map by index. */
export function collectBlockElements(doc: Document): Element[] {
  const out: Element[] = [];
  for (const element of Array.from(doc.querySelectorAll(LEAF_SELECTOR))) {
    if (element.closest("#sensetable-sidebar")) continue; // never track our own panel
    if ((element.textContent ?? "").trim() === "") continue;
    if (element.matches("li") && element.querySelector("li")) {
      // nested lists: the engine splits inner items out; keep outer li anyway,
      // it still owns its direct text
    }
    out.push(element);
  }
  return out;
}

export interface SidebarOptions {
  engineBaseUrl: string;
  sessionId?: string;
  now?: () => number;
}

export class Sidebar {
  client!: EngineClient;
  capture: SignalCapture | null = null;
  panel: HTMLElement | null = null;
  revision = 0;
  state: StateSnapshot | null = null;
  private blockByElement = new Map<Element, string>();
  private abort = new AbortController();
  private detach: (() => void)[] = [];

  constructor(private doc: Document, private options: SidebarOptions) {}

  blockOf = (node: Node | null): string | null => {
    let element: Element | null =
      node instanceof Element ? node : node?.parentElement ?? null;
    while (element) {
      const blockId = this.blockByElement.get(element);
      if (blockId) return blockId;
      element = element.parentElement;
    }
    return null;
  };

  async connect(): Promise<void> {
    this.client = await EngineClient.create(this.options.engineBaseUrl, this.options.sessionId);

    const elements = collectBlockElements(this.doc);
    const ingest = await this.client.ingestPage({
      url: this.doc.defaultView?.location.href ?? "https://unknown.invalid/",
      title: this.doc.title,
      html: this.doc.documentElement.outerHTML,
      captured_at: (this.options.now ?? Date.now)(),
    });
    // zip client-side leaves with engine blocks by order; mismatched tails
    // stay unmapped and their signals are dropped with a log line
    const textBlocks = ingest.blocks.filter((b) => b.kind !== "other");
    const count = Math.min(elements.length, textBlocks.length);
    if (elements.length !== textBlocks.length) {
      console.warn(
        `[sidebar] block map mismatch: page has ${elements.length} leaf elements, engine reports ${textBlocks.length}`,
      );
    }
    for (let i = 0; i < count; i++) {
      this.blockByElement.set(elements[i], textBlocks[i].block_id);
    }

    this.capture = new SignalCapture(
      this.doc,
      ingest.page_id,
      this.blockOf,
      (events) => {
        void this.client.sendEvents(events).catch((error) => {
          console.warn(`[sidebar] event batch failed: ${String(error)}`);
        });
      },
      { now: this.options.now },
    );
    this.capture.start();
    this.detach.push(observeDwells(this.capture, this.blockByElement, this.doc.defaultView as Window));
    this.detach.push(
      attachSelectionPopup(this.doc, ingest.page_id, this.blockOf, this.steer),
    );

    this.mountPanel();
    void this.client.subscribe((diff) => {
      this.revision = diff.revision;
      if (this.state === null) {
        void this.client.getState().then((state) => {
          this.state = state;
          this.render();
        });
        return;
      }
      Object.assign(this.state, diff.changed);
      this.state.revision = diff.revision;
      this.render();
    }, this.abort.signal);
  }

  steer = (action: ActionRequest): void => {
    void this.client
      .applyAction(action)
      .catch((error) => console.warn(`[sidebar] action failed: ${String(error)}`));
  };

  private mountPanel(): void {
    const panel = this.doc.createElement("aside");
    panel.id = "sensetable-sidebar";
    panel.className = "hidden";
    const listRoot = this.doc.createElement("div");
    listRoot.className = "list-root";
    const tableRoot = this.doc.createElement("div");
    tableRoot.className = "table-root hidden";
    const toggleView = this.doc.createElement("button");
    toggleView.className = "view-toggle";
    toggleView.textContent = "table view";
    toggleView.addEventListener("click", () => {
      listRoot.classList.toggle("hidden");
      tableRoot.classList.toggle("hidden");
      toggleView.textContent = tableRoot.classList.contains("hidden")
        ? "table view"
        : "list view";
    });
    panel.appendChild(toggleView);
    panel.appendChild(listRoot);
    panel.appendChild(tableRoot);
    this.doc.body.appendChild(panel);
    this.panel = panel;
  }

  /** Extension icon / keyboard shortcut hook; capture keeps running while
   * the panel is hidden. */
  togglePanel(): void {
    this.panel?.classList.toggle("hidden");
  }

  teleport = (url: string, scrollOffset: number): void => {
    const win = this.doc.defaultView;
    if (!win) return;
    if (win.location.href === url) {
      win.scrollTo(0, scrollOffset);
    } else {
      win.open(`${url}#:~:scroll=${scrollOffset}`, "_blank");
    }
  };

  render(): void {
    if (!this.state || !this.panel) return;
    const listRoot = this.panel.querySelector(".list-root") as HTMLElement;
    const tableRoot = this.panel.querySelector(".table-root") as HTMLElement;
    renderListView(this.doc, listRoot, this.state, this.steer);
    renderTableView(this.doc, tableRoot, this.state, this.steer, this.teleport);
  }

  disconnect(): void {
    this.abort.abort();
    this.capture?.stop();
    for (const undo of this.detach.splice(0)) undo();
    this.panel?.remove();
  }
}
