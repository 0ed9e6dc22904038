// Wire types for the engine API. Field names mirror the JSON schemas exactly.

export type SignalKind = "copy" | "highlight" | "click" | "hover" | "dwell";

export interface SignalEventPayload {
  kind: SignalKind;
  page_id: string;
  block_id: string;
  timestamp: number; // ms since epoch
  duration_s?: number; // hover/dwell
  text_len?: number; // highlight
  highlight_linked?: boolean; // clicks that conclude a selection
}

export interface BlockInfo {
  block_id: string;
  order_index: number;
  kind: string;
  scroll_offset: number;
}

export interface PageIngestResponse {
  schema_version: number;
  revision: number;
  page_id: string;
  blocks: BlockInfo[];
}

export interface EventBatchResponse {
  schema_version: number;
  revision: number;
  accepted: number;
  rejected: { index: number; reason: string }[];
}

export interface ActionRequest {
  kind:
    | "pin"
    | "unpin"
    | "reorder"
    | "merge"
    | "split"
    | "rename"
    | "delete"
    | "set_rating"
    | "move_snippet"
    | "set_visible_count"
    | "manual_capture";
  payload: Record<string, unknown>;
  timestamp?: number;
}

export interface OptionView {
  option_id: string;
  name: string;
  placeholder: boolean;
}

export interface CriterionRow {
  group_id: string;
  label: string;
  score: number;
  pinned: boolean;
  member_count: number;
  grouped: boolean;
  overlooked: boolean;
}

export interface ListView {
  options: OptionView[];
  criteria: CriterionRow[];
}

export interface SnippetView {
  snippet_id: string;
  page_id: string;
  block_id: string;
  text: string;
  html: string;
  url: string;
  scroll_offset: number;
  scroll_estimated: boolean;
  captured_at: number;
  rating: "positive" | "negative" | "informational" | "unrated";
  teleport: { url: string; scroll_offset: number; estimated: boolean };
}

export interface TableView {
  options: { option_id: string; name: string }[];
  groups: { group_id: string; label: string; score: number; pinned: boolean }[];
  cells: Record<string, Record<string, SnippetView[]>>;
}

export interface RankingView {
  order: string[];
  visible: string[];
  pinned: string[];
  visible_count: number;
  scores?: Record<string, number>;
}

export interface StateSnapshot {
  schema_version: number;
  session_id: string;
  revision: number;
  list_view: ListView;
  table_view: TableView;
  ranking: RankingView;
  [key: string]: unknown;
}

export interface StateDiff {
  schema_version: number;
  session_id: string;
  since: number;
  revision: number;
  changed: Partial<StateSnapshot>;
}
