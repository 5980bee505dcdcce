/** UI state and its pure transitions.
 *
 * Everything rendered comes from exactly one snapshot plus the steering
 * form; the shell feeds events through these functions and re-renders, so
 * reconnecting with the same snapshot reproduces the identical view.
 */

import type { Snapshot, StreamEvent, SteerBody, ViewTreeDoc } from "./types.js";

export type Tab = "selection" | "regression" | "chowliu" | "maintenance";

export type ConnStatus = "connecting" | "live" | "closed";

export interface FormState {
  label: string;
  threshold: string; // raw input text; parsed on submit
  lambda: string;
  features: string[];
  allFeatures: boolean;
}

export interface GapInfo {
  from: number;
  to: number;
}

export interface UiState {
  snapshot: Snapshot | null;
  viewtree: ViewTreeDoc | null;
  tab: Tab;
  conn: ConnStatus;
  gap: GapInfo | null; // stale-data marker until the next snapshot lands
  steerPending: boolean;
  steerError: string | null;
  steerAck: number | null; // first seq that will reflect the last command
  drill: { row: string; col: string } | null; // covar grid cell drill-down
  sqlNode: string | null; // maintenance node whose pseudo-SQL is open
  form: FormState;
}

export function initialState(): UiState {
  return {
    snapshot: null,
    viewtree: null,
    tab: "selection",
    conn: "connecting",
    gap: null,
    steerPending: false,
    steerError: null,
    steerAck: null,
    drill: null,
    sqlNode: null,
    form: { label: "", threshold: "", lambda: "", features: [], allFeatures: true },
  };
}

/** Fill form fields from engine-side steering the first time data arrives;
 * afterwards the form belongs to the user. */
function seedForm(state: UiState, snap: Snapshot): FormState {
  if (state.snapshot !== null) return state.form;
  const s = snap.steering;
  return {
    label: s.label ?? "",
    threshold: String(s.threshold),
    lambda: String(s.lambda),
    features: s.features ?? [],
    allFeatures: s.features === null,
  };
}

export function applyStream(state: UiState, ev: StreamEvent): UiState {
  if (ev.type === "gap") {
    return { ...state, gap: { from: ev.missed_from, to: ev.missed_to } };
  }
  const cur = state.snapshot;
  if (cur !== null && ev.seq <= cur.seq) return state; // stale replay
  return {
    ...state,
    snapshot: ev.payload,
    form: seedForm(state, ev.payload),
    gap: null, // the latest snapshot is current again
  };
}

export function withViewtree(state: UiState, doc: ViewTreeDoc): UiState {
  return { ...state, viewtree: doc };
}

export function withConn(state: UiState, conn: ConnStatus): UiState {
  return { ...state, conn };
}

export function withTab(state: UiState, tab: Tab): UiState {
  return { ...state, tab };
}

export function withForm(state: UiState, patch: Partial<FormState>): UiState {
  return { ...state, form: { ...state.form, ...patch } };
}

export function withDrill(state: UiState, row: string, col: string): UiState {
  const same = state.drill && state.drill.row === row && state.drill.col === col;
  return { ...state, drill: same ? null : { row, col } };
}

export function withSqlNode(state: UiState, id: string): UiState {
  return { ...state, sqlNode: state.sqlNode === id ? null : id };
}

export function steerStarted(state: UiState): UiState {
  return { ...state, steerPending: true, steerError: null };
}

export function steerAccepted(state: UiState, effectiveSeq: number): UiState {
  return { ...state, steerPending: false, steerAck: effectiveSeq };
}

export function steerRejected(state: UiState, detail: string): UiState {
  return { ...state, steerPending: false, steerError: detail };
}

/** Build the POST /steer body for a form field; null means "not submittable"
 * (e.g. unparseable number), reported as a local form error instead. */
export function buildSteer(
  kind: "label" | "threshold" | "lambda" | "features" | "pause" | "resume",
  form: FormState,
): SteerBody | null {
  switch (kind) {
    case "label":
      return form.label ? { type: "set_label", value: form.label } : null;
    case "threshold": {
      const v = Number(form.threshold);
      return Number.isFinite(v) ? { type: "set_threshold", value: v } : null;
    }
    case "lambda": {
      const v = Number(form.lambda);
      return Number.isFinite(v) ? { type: "set_lambda", value: v } : null;
    }
    case "features":
      return {
        type: "set_features",
        value: form.allFeatures ? null : form.features,
      };
    case "pause":
      return { type: "pause" };
    case "resume":
      return { type: "resume" };
  }
}
