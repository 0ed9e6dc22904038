export { EngineClient, EngineError, parseSseFrames } from "./client.js";
export { SignalCapture, observeDwells } from "./capture.js";
export {
  SEE_MORE_STEP,
  attachSelectionPopup,
  handleDrop,
  renderListView,
  renderTableView,
  splitGroup,
} from "./views.js";
export { Sidebar, collectBlockElements } from "./sidebar.js";
export type * from "./types.js";
