// View rendering and steering: every gesture round-trips as an engine action.

import { beforeEach, describe, expect, it } from "vitest";

import {
  SEE_MORE_STEP,
  attachSelectionPopup,
  handleDrop,
  renderListView,
  renderTableView,
  splitGroup,
} from "../src/views.js";
import type { ActionRequest, StateSnapshot } from "../src/types.js";

function fixtureState(): StateSnapshot {
  return {
    schema_version: 1,
    session_id: "s1",
    revision: 4,
    ranking: {
      order: ["g1", "g2"],
      visible: ["g1", "g2"],
      pinned: ["g1"],
      visible_count: 15,
    },
    list_view: {
      options: [
        { option_id: "o1", name: "Splide", placeholder: false },
        { option_id: "o2", name: "Scratch notes", placeholder: true },
      ],
      criteria: [
        {
          group_id: "g1", label: "RTL", score: 42, pinned: true,
          member_count: 2, grouped: true, overlooked: true,
        },
        {
          group_id: "g2", label: "Price", score: 7, pinned: false,
          member_count: 1, grouped: false, overlooked: false,
        },
      ],
    },
    table_view: {
      options: [{ option_id: "o1", name: "Splide" }],
      groups: [
        { group_id: "g1", label: "RTL", score: 42, pinned: true },
        { group_id: "g2", label: "Price", score: 7, pinned: false },
      ],
      cells: {
        g1: {
          o1: [
            {
              snippet_id: "s1", page_id: "p1", block_id: "b1",
              text: "mirrors the whole track", html: "<p>mirrors the <b>whole</b> track</p>",
              url: "https://splide.example/docs", scroll_offset: 840,
              scroll_estimated: false, captured_at: 10, rating: "unrated",
              teleport: { url: "https://splide.example/docs", scroll_offset: 840, estimated: false },
            },
          ],
        },
      },
    },
  };
}

let actions: ActionRequest[];
const steer = (action: ActionRequest) => actions.push(action);

beforeEach(() => {
  actions = [];
  document.body.innerHTML = '<div id="root"></div>';
});

describe("list view", () => {
  it("renders options, dots, and group icons from the view model", () => {
    renderListView(document, document.getElementById("root")!, fixtureState(), steer);
    const options = [...document.querySelectorAll(".option")].map((n) => n.textContent);
    expect(options).toEqual(["Splide", "Scratch notes"]);
    const rows = [...document.querySelectorAll(".criterion")];
    expect(rows).toHaveLength(2);
    expect(rows[0].querySelector(".dot")).not.toBeNull(); // overlooked -> dot
    expect(rows[1].querySelector(".dot")).toBeNull();
    expect(rows[0].querySelector(".group-icon")).not.toBeNull();
    expect(rows[0].classList.contains("pinned")).toBe(true);
  });

  it("pin button emits a pin action for unpinned rows", () => {
    renderListView(document, document.getElementById("root")!, fixtureState(), steer);
    const priceRow = [...document.querySelectorAll(".criterion")][1];
    (priceRow.querySelector("button.pin") as HTMLButtonElement).click();
    expect(actions).toEqual([{ kind: "pin", payload: { group_id: "g2" } }]);
  });

  it("pin button emits unpin for pinned rows", () => {
    renderListView(document, document.getElementById("root")!, fixtureState(), steer);
    const rtlRow = [...document.querySelectorAll(".criterion")][0];
    (rtlRow.querySelector("button.pin") as HTMLButtonElement).click();
    expect(actions).toEqual([{ kind: "unpin", payload: { group_id: "g1" } }]);
  });

  it("see more/less step by five and floor at one", () => {
    renderListView(document, document.getElementById("root")!, fixtureState(), steer);
    (document.querySelector("button.see-more") as HTMLButtonElement).click();
    (document.querySelector("button.see-less") as HTMLButtonElement).click();
    expect(actions).toEqual([
      { kind: "set_visible_count", payload: { count: 15 + SEE_MORE_STEP } },
      { kind: "set_visible_count", payload: { count: 15 - SEE_MORE_STEP } },
    ]);
    expect(SEE_MORE_STEP).toBe(5);
  });
});

describe("drag semantics", () => {
  it("plain drop reorders (and thereby pins)", () => {
    handleDrop("g2", "g1", 0, { altKey: false }, steer);
    expect(actions).toEqual([{ kind: "reorder", payload: { group_id: "g2", new_index: 0 } }]);
  });

  it("alt-drop merges the groups", () => {
    handleDrop("g2", "g1", 0, { altKey: true }, steer);
    expect(actions).toEqual([{ kind: "merge", payload: { group_a: "g1", group_b: "g2" } }]);
  });

  it("split sends a singleton partition", () => {
    splitGroup("g1", ["c1", "c2"], steer);
    expect(actions).toEqual([
      { kind: "split", payload: { group_id: "g1", partition: [["c1"], ["c2"]] } },
    ]);
  });
});

describe("table view", () => {
  it("renders the grid and teleports on snippet click", () => {
    const jumps: [string, number][] = [];
    renderTableView(
      document,
      document.getElementById("root")!,
      fixtureState(),
      steer,
      (url, offset) => jumps.push([url, offset]),
    );
    const headers = [...document.querySelectorAll("th")].map((n) => n.textContent);
    expect(headers).toEqual(["option", "RTL", "Price", "Splide"]);
    const chip = document.querySelector(".snippet") as HTMLElement;
    expect(chip.textContent).toContain("mirrors the whole track");
    chip.click();
    expect(jumps).toEqual([["https://splide.example/docs", 840]]);
  });

  it("zoom payload carries the original markup and toggles on hover", () => {
    renderTableView(
      document, document.getElementById("root")!, fixtureState(), steer, () => undefined,
    );
    const chip = document.querySelector(".snippet") as HTMLElement;
    const zoom = chip.querySelector(".zoom") as HTMLElement;
    expect(zoom.innerHTML).toContain("<b>whole</b>");
    expect(zoom.classList.contains("hidden")).toBe(true);
    chip.dispatchEvent(new MouseEvent("mouseover", { bubbles: true }));
    expect(zoom.classList.contains("hidden")).toBe(false);
  });

  it("rating buttons emit set_rating", () => {
    renderTableView(
      document, document.getElementById("root")!, fixtureState(), steer, () => undefined,
    );
    const positive = document.querySelector("button.rating") as HTMLButtonElement;
    positive.click();
    expect(actions).toEqual([
      { kind: "set_rating", payload: { snippet_id: "s1", rating: "positive" } },
    ]);
  });
});

describe("selection popup", () => {
  it("offers manual capture for the selected text", () => {
    document.body.innerHTML = '<p id="a">bundle size matters a lot</p>';
    const block = document.getElementById("a")!;
    const detach = attachSelectionPopup(document, "p1", () => "blk-a", steer);

    const range = document.createRange();
    range.setStart(block.firstChild!, 0);
    range.setEnd(block.firstChild!, 11);
    const selection = window.getSelection()!;
    selection.removeAllRanges();
    selection.addRange(range);
    document.dispatchEvent(new MouseEvent("mouseup", { bubbles: true }));

    const popup = document.querySelector(".capture-popup") as HTMLElement;
    expect(popup.classList.contains("hidden")).toBe(false);
    (popup.querySelector("button.save-criterion") as HTMLButtonElement).click();
    expect(actions).toEqual([
      {
        kind: "manual_capture",
        payload: {
          text: "bundle size",
          capture_kind: "criterion",
          page_id: "p1",
          block_id: "blk-a",
        },
      },
    ]);
    detach();
  });
});
