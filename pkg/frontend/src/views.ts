// Render the engine's view models into the sidebar and translate user
// gestures back into engine actions. The engine state is the single source
// of truth: every handler emits an action and waits for the next diff;
// nothing here mutates view state locally.

import type { ActionRequest, ListView, StateSnapshot, TableView } from "./types.js";

export const SEE_MORE_STEP = 5;

export type Steer = (action: ActionRequest) => void;
export type Teleport = (url: string, scrollOffset: number) => void;

function el(doc: Document, tag: string, className?: string, text?: string): HTMLElement {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderListView(
  doc: Document,
  root: HTMLElement,
  state: StateSnapshot,
  steer: Steer,
): void {
  const view: ListView = state.list_view;
  root.textContent = "";

  const optionsPane = el(doc, "section", "options-pane");
  optionsPane.appendChild(el(doc, "h3", undefined, "Options"));
  const optionList = el(doc, "ul", "options");
  for (const option of view.options) {
    const item = el(doc, "li", option.placeholder ? "option placeholder" : "option", option.name);
    item.dataset.optionId = option.option_id;
    optionList.appendChild(item);
  }
  optionsPane.appendChild(optionList);
  root.appendChild(optionsPane);

  const criteriaPane = el(doc, "section", "criteria-pane");
  criteriaPane.appendChild(el(doc, "h3", undefined, "Criteria"));
  const criteriaList = el(doc, "ul", "criteria");
  view.criteria.forEach((row, index) => {
    const item = el(doc, "li", row.pinned ? "criterion pinned" : "criterion");
    item.dataset.groupId = row.group_id;
    item.dataset.index = String(index);
    item.draggable = true;

    const label = el(doc, "span", "label", row.label);
    item.appendChild(label);
    if (row.grouped) {
      const icon = el(doc, "span", "group-icon", "⧉");
      icon.title = `${row.member_count} merged criteria`;
      item.appendChild(icon);
    }
    if (row.overlooked) {
      item.appendChild(el(doc, "span", "dot", "●"));
    }
    const pinButton = el(doc, "button", "pin", row.pinned ? "unpin" : "pin");
    pinButton.addEventListener("click", () =>
      steer({
        kind: row.pinned ? "unpin" : "pin",
        payload: { group_id: row.group_id },
      }),
    );
    item.appendChild(pinButton);

    item.addEventListener("dragstart", (event) => {
      (event as DragEvent).dataTransfer?.setData("text/group-id", row.group_id);
    });
    item.addEventListener("drop", (event) => {
      const dragged = (event as DragEvent).dataTransfer?.getData("text/group-id");
      if (!dragged || dragged === row.group_id) return;
      handleDrop(dragged, row.group_id, index, event as DragEvent, steer);
    });
    criteriaList.appendChild(item);
  });
  criteriaPane.appendChild(criteriaList);

  const controls = el(doc, "div", "controls");
  const seeMore = el(doc, "button", "see-more", "See more");
  seeMore.addEventListener("click", () =>
    steer({
      kind: "set_visible_count",
      payload: { count: state.ranking.visible_count + SEE_MORE_STEP },
    }),
  );
  const seeLess = el(doc, "button", "see-less", "See less");
  seeLess.addEventListener("click", () =>
    steer({
      kind: "set_visible_count",
      payload: { count: Math.max(1, state.ranking.visible_count - SEE_MORE_STEP) },
    }),
  );
  controls.appendChild(seeMore);
  controls.appendChild(seeLess);
  criteriaPane.appendChild(controls);
  root.appendChild(criteriaPane);
}

/** Dropping onto a row reorders by default; holding Alt merges the two
 * criterion groups instead (drag-onto grouping). */
export function handleDrop(
  draggedGroupId: string,
  targetGroupId: string,
  targetIndex: number,
  event: { altKey?: boolean },
  steer: Steer,
): void {
  if (event.altKey) {
    steer({ kind: "merge", payload: { group_a: targetGroupId, group_b: draggedGroupId } });
  } else {
    steer({ kind: "reorder", payload: { group_id: draggedGroupId, new_index: targetIndex } });
  }
}

export function splitGroup(groupId: string, memberIds: string[], steer: Steer): void {
  // context-menu split: every member back to its own group
  steer({
    kind: "split",
    payload: { group_id: groupId, partition: memberIds.map((id) => [id]) },
  });
}

export function renderTableView(
  doc: Document,
  root: HTMLElement,
  state: StateSnapshot,
  steer: Steer,
  teleport: Teleport,
): void {
  const view: TableView = state.table_view;
  root.textContent = "";
  const table = el(doc, "table", "comparison");
  const head = el(doc, "tr");
  head.appendChild(el(doc, "th", undefined, "option"));
  for (const group of view.groups) {
    const cell = el(doc, "th", group.pinned ? "pinned" : undefined, group.label);
    cell.dataset.groupId = group.group_id;
    head.appendChild(cell);
  }
  table.appendChild(head);

  for (const option of view.options) {
    const row = el(doc, "tr");
    row.appendChild(el(doc, "th", undefined, option.name));
    for (const group of view.groups) {
      const cell = el(doc, "td");
      cell.dataset.optionId = option.option_id;
      cell.dataset.groupId = group.group_id;
      const snippets = view.cells[group.group_id]?.[option.option_id] ?? [];
      for (const snippet of snippets) {
        const chip = el(doc, "div", `snippet ${snippet.rating}`);
        chip.dataset.snippetId = snippet.snippet_id;
        const body = el(doc, "span", "text", snippet.text.slice(0, 80));
        chip.appendChild(body);
        const zoom = el(doc, "div", "zoom hidden");
        zoom.innerHTML = snippet.html; // original styling for the zoom lens
        chip.appendChild(zoom);
        chip.addEventListener("mouseover", () => zoom.classList.remove("hidden"));
        chip.addEventListener("mouseout", () => zoom.classList.add("hidden"));
        chip.addEventListener("click", () =>
          teleport(snippet.teleport.url, snippet.teleport.scroll_offset),
        );
        chip.appendChild(ratingControl(doc, snippet.snippet_id, snippet.rating, steer));
        cell.appendChild(chip);
      }
      row.appendChild(cell);
    }
    table.appendChild(row);
  }
  root.appendChild(table);
}

function ratingControl(
  doc: Document,
  snippetId: string,
  current: string,
  steer: Steer,
): HTMLElement {
  const wrap = el(doc, "span", "ratings");
  for (const rating of ["positive", "negative", "informational"] as const) {
    const mark = { positive: "+", negative: "-", informational: "i" }[rating];
    const button = el(doc, "button", rating === current ? "rating active" : "rating", mark);
    button.addEventListener("click", (event) => {
      event.stopPropagation();
      steer({ kind: "set_rating", payload: { snippet_id: snippetId, rating } });
    });
    wrap.appendChild(button);
  }
  return wrap;
}

/** Selection popup offering to save the selected text as an option or a
 * criterion (the manual-capture backup path). */
export function attachSelectionPopup(
  doc: Document,
  pageId: string,
  blockOf: (node: Node | null) => string | null,
  steer: Steer,
): () => void {
  const popup = el(doc, "div", "capture-popup hidden");
  const saveOption = el(doc, "button", "save-option", "Save as option");
  const saveCriterion = el(doc, "button", "save-criterion", "Save as criterion");
  popup.appendChild(saveOption);
  popup.appendChild(saveCriterion);
  doc.body.appendChild(popup);

  let pending: { text: string; blockId: string | null } = { text: "", blockId: null };

  const capture = (kind: "option" | "criterion") => {
    if (!pending.text) return;
    steer({
      kind: "manual_capture",
      payload: {
        text: pending.text,
        capture_kind: kind,
        page_id: pageId,
        block_id: pending.blockId,
      },
    });
    popup.classList.add("hidden");
  };
  saveOption.addEventListener("click", () => capture("option"));
  saveCriterion.addEventListener("click", () => capture("criterion"));

  const onMouseUp = () => {
    const selection = doc.defaultView?.getSelection?.();
    const text = selection?.toString().trim() ?? "";
    if (text) {
      pending = { text, blockId: blockOf(selection?.anchorNode ?? null) };
      popup.classList.remove("hidden");
    } else {
      popup.classList.add("hidden");
    }
  };
  doc.addEventListener("mouseup", onMouseUp);
  return () => {
    doc.removeEventListener("mouseup", onMouseUp);
    popup.remove();
  };
}
