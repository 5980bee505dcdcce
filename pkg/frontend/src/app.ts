/** Browser shell: owns the EventSource, fetches, and DOM writes.
 *
 * All state lives in a single UiState; every change funnels through a pure
 * transition and one render call.  Event handlers are delegated off the app
 * root via data-* attributes so re-rendering never re-binds listeners.
 */

import type { Snapshot, SteerBody, StreamEvent, ViewTreeDoc } from "./types.js";
import {
  applyStream,
  buildSteer,
  initialState,
  steerAccepted,
  steerRejected,
  steerStarted,
  withConn,
  withDrill,
  withForm,
  withSqlNode,
  withTab,
  withViewtree,
  type Tab,
  type UiState,
} from "./state.js";
import { renderApp } from "./render.js";

let state: UiState = initialState();
const root = document.getElementById("app")!;

function set(next: UiState): void {
  if (next === state) return;
  state = next;
  root.innerHTML = renderApp(state);
}

async function fetchJson<T>(url: string): Promise<T | null> {
  try {
    const res = await fetch(url);
    if (!res.ok) return null;
    return (await res.json()) as T;
  } catch {
    return null;
  }
}

async function refreshViewtree(): Promise<void> {
  const doc = await fetchJson<ViewTreeDoc>("/viewtree");
  if (doc) set(withViewtree(state, doc));
}

async function refreshLatest(): Promise<void> {
  const snap = await fetchJson<Snapshot>("/snapshot/latest");
  if (snap) set(applyStream(state, { type: "snapshot", seq: snap.seq, payload: snap }));
}

function connect(): void {
  const es = new EventSource("/stream");
  es.onopen = () => {
    set(withConn(state, "live"));
    // the stream only carries events from now on; catch up explicitly
    void refreshLatest();
    void refreshViewtree();
  };
  es.onmessage = (msg) => {
    let ev: StreamEvent;
    try {
      ev = JSON.parse(msg.data) as StreamEvent;
    } catch {
      return;
    }
    set(applyStream(state, ev));
    if (ev.type === "snapshot" && state.tab === "maintenance") {
      void refreshViewtree();
    }
  };
  es.onerror = () => {
    set(withConn(state, "connecting"));
    // EventSource reconnects by itself; onopen resyncs us
  };
}

async function steer(body: SteerBody): Promise<void> {
  if (state.steerPending) return; // at most one in flight
  set(steerStarted(state));
  try {
    const res = await fetch("/steer", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const doc = (await res.json()) as { effective_seq?: number; detail?: string };
    if (res.ok && doc.effective_seq !== undefined) {
      set(steerAccepted(state, doc.effective_seq));
    } else {
      set(steerRejected(state, doc.detail ?? `http ${res.status}`));
    }
  } catch (err) {
    set(steerRejected(state, String(err)));
  }
}

function steerFromForm(kind: "label" | "threshold" | "lambda" | "features"): void {
  const body = buildSteer(kind, state.form);
  if (body) void steer(body);
}

root.addEventListener("click", (e) => {
  const el = (e.target as HTMLElement).closest<HTMLElement>(
    "[data-tab],[data-cell],[data-node],#steer-pause,#steer-resume,#steer-apply-features",
  );
  if (!el) return;
  if (el.dataset.tab) {
    set(withTab(state, el.dataset.tab as Tab));
    if (el.dataset.tab === "maintenance" && !state.viewtree) void refreshViewtree();
  } else if (el.dataset.cell) {
    const [row, col] = el.dataset.cell.split("|");
    set(withDrill(state, row, col));
  } else if (el.dataset.node) {
    set(withSqlNode(state, el.dataset.node));
  } else if (el.id === "steer-pause") {
    void steer({ type: "pause" });
  } else if (el.id === "steer-resume") {
    void steer({ type: "resume" });
  } else if (el.id === "steer-apply-features") {
    steerFromForm("features");
  }
});

root.addEventListener("change", (e) => {
  const el = e.target as HTMLInputElement | HTMLSelectElement;
  if (el.id === "steer-label") {
    set(withForm(state, { label: el.value }));
    steerFromForm("label");
  } else if (el.id === "steer-threshold") {
    set(withForm(state, { threshold: el.value }));
    steerFromForm("threshold");
  } else if (el.id === "steer-lambda") {
    set(withForm(state, { lambda: el.value }));
    steerFromForm("lambda");
  } else if (el.id === "steer-all-features") {
    set(withForm(state, { allFeatures: (el as HTMLInputElement).checked }));
    if (state.form.allFeatures) steerFromForm("features");
  } else if (el instanceof HTMLInputElement && el.dataset.feature) {
    const attr = el.dataset.feature;
    const feats = el.checked
      ? [...state.form.features.filter((f) => f !== attr), attr]
      : state.form.features.filter((f) => f !== attr);
    set(withForm(state, { features: feats }));
  }
});

root.innerHTML = renderApp(state);
connect();
