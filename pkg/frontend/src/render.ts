/** Pure HTML renderers: (state) -> markup strings.
 *
 * No clocks, no randomness, no document access — the same UiState always
 * yields the same markup, which is what the reconnect-purity tests pin.
 * The shell assigns the result to innerHTML and routes events back through
 * data-* attributes.
 */

import type {
  CovarDoc,
  MiDoc,
  ChowLiuDoc,
  Snapshot,
  ViewTreeDoc,
} from "./types.js";
import type { Tab, UiState } from "./state.js";

export function esc(s: unknown): string {
  return String(s)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Compact deterministic number formatting for table cells. */
export function fmt(v: number | null | undefined): string {
  if (v === null || v === undefined || Number.isNaN(v)) return "–";
  if (Number.isInteger(v) && Math.abs(v) < 1e15) return String(v);
  const a = Math.abs(v);
  if (a !== 0 && (a < 1e-4 || a >= 1e6)) return v.toExponential(3);
  return String(Number(v.toFixed(6)));
}

/** Heat shading normalized to this snapshot's strongest pairwise value. */
export function heatAlpha(v: number, max: number): number {
  if (max <= 0) return 0;
  const a = v / max;
  return a < 0 ? 0 : a > 1 ? 1 : a;
}

const TABS: [Tab, string][] = [
  ["selection", "Model Selection"],
  ["regression", "Regression"],
  ["chowliu", "Dependence Tree"],
  ["maintenance", "Maintenance"],
];

export function renderApp(state: UiState): string {
  return [
    renderHeader(state),
    renderBanner(state),
    renderNav(state.tab),
    `<main class="tab-body">${renderTab(state)}</main>`,
  ].join("\n");
}

function renderHeader(state: UiState): string {
  const snap = state.snapshot;
  const conn = `<span class="conn conn-${state.conn}">${state.conn}</span>`;
  if (!snap) {
    return `<header><h1>ringview</h1>${conn}<span class="dim">waiting for a snapshot…</span></header>`;
  }
  const paused = snap.steering.paused
    ? '<span class="badge badge-paused">paused</span>'
    : "";
  const rate =
    snap.throughput_updates_per_s !== null
      ? `${fmt(Math.round(snap.throughput_updates_per_s))} upd/s`
      : "–";
  return (
    `<header><h1>ringview</h1>${conn}` +
    `<span class="badge">${esc(snap.mode)}</span>${paused}` +
    `<span class="stat">snapshot <b>#${snap.seq}</b></span>` +
    `<span class="stat">${fmt(snap.updates_applied)} updates</span>` +
    `<span class="stat">${rate}</span>` +
    renderSteerStatus(state) +
    `</header>`
  );
}

function renderSteerStatus(state: UiState): string {
  if (state.steerPending) return '<span class="steer-note">steering…</span>';
  if (state.steerError)
    return `<span class="steer-note steer-error">rejected: ${esc(state.steerError)}</span>`;
  if (state.steerAck !== null)
    return `<span class="steer-note">applies from snapshot #${state.steerAck}</span>`;
  return "";
}

function renderBanner(state: UiState): string {
  if (!state.gap) return "";
  const { from, to } = state.gap;
  const range = from === to ? `snapshot ${from}` : `snapshots ${from}–${to}`;
  return `<div class="banner banner-stale">stream fell behind: missed ${range}; showing latest known data</div>`;
}

function renderNav(active: Tab): string {
  const items = TABS.map(
    ([tab, label]) =>
      `<button class="tab${tab === active ? " active" : ""}" data-tab="${tab}">${label}</button>`,
  );
  return `<nav class="tabs">${items.join("")}</nav>`;
}

function renderTab(state: UiState): string {
  const snap = state.snapshot;
  if (!snap) return '<p class="dim">no data yet</p>';
  if (snap.analytics.error && state.tab !== "maintenance") {
    return `<div class="banner banner-error">analytics unavailable: ${esc(snap.analytics.error)}</div>`;
  }
  switch (state.tab) {
    case "selection":
      return renderSelectionTab(state, snap);
    case "regression":
      return renderRegressionTab(state, snap);
    case "chowliu":
      return renderChowLiuTab(snap);
    case "maintenance":
      return renderMaintenanceTab(state, snap);
  }
}

// ---------------------------------------------------------------------------
// Model selection
// ---------------------------------------------------------------------------

function renderSelectionTab(state: UiState, snap: Snapshot): string {
  const sel = snap.analytics.selection;
  if (!sel) {
    return needsMode("feature ranking", "mi", snap.mode);
  }
  const rows = sel.ranking.map((r, i) => {
    const cls = r.selected ? ' class="selected"' : "";
    const bar = barWidth(r.mi, sel.ranking);
    return (
      `<tr${cls}><td>${i + 1}</td><td>${esc(r.attr)}</td>` +
      `<td class="num" title="${r.mi}">${fmt(r.mi)}</td>` +
      `<td><div class="bar" style="width:${bar}%"></div></td>` +
      `<td>${r.selected ? "✓" : ""}</td></tr>`
    );
  });
  const count = sel.ranking.filter((r) => r.selected).length;
  return (
    steeringForm(state, snap, ["label", "threshold"]) +
    `<p>label <b>${esc(sel.label)}</b>, threshold <b>${fmt(sel.threshold)}</b>: ` +
    `<b>${count}</b> of ${sel.ranking.length} attributes selected (strictly above threshold)</p>` +
    `<table class="ranking"><thead><tr><th>#</th><th>attribute</th>` +
    `<th>MI with label</th><th></th><th>selected</th></tr></thead>` +
    `<tbody>${rows.join("")}</tbody></table>`
  );
}

function barWidth(v: number, ranking: { mi: number }[]): number {
  const max = ranking.reduce((m, r) => (r.mi > m ? r.mi : m), 0);
  return max > 0 ? Math.round((100 * v) / max) : 0;
}

// ---------------------------------------------------------------------------
// Regression
// ---------------------------------------------------------------------------

interface AttrBlock {
  key: string; // attr name, or "intercept"
  indices: number[]; // feature columns belonging to this attribute
  categorical: boolean;
}

/** Group expanded one-hot columns back into attribute-level blocks, in
 * feature order (intercept first). */
export function attrBlocks(covar: CovarDoc): AttrBlock[] {
  const blocks: AttrBlock[] = [];
  const byKey = new Map<string, AttrBlock>();
  covar.features.forEach((f, i) => {
    const key = f.attr === null ? "intercept" : f.attr;
    let b = byKey.get(key);
    if (!b) {
      b = { key, indices: [], categorical: false };
      byKey.set(key, b);
      blocks.push(b);
    }
    b.indices.push(i);
    if (f.category !== null) b.categorical = true;
  });
  return blocks;
}

/** 0 = scalar cell, 1 = vector (one side categorical), 2 = matrix. */
function blockDims(a: AttrBlock, b: AttrBlock): number {
  return (a.categorical ? 1 : 0) + (b.categorical ? 1 : 0);
}

function renderRegressionTab(state: UiState, snap: Snapshot): string {
  const covar = snap.analytics.covar;
  const model = snap.analytics.model;
  if (!covar || !model) {
    return needsMode("the regression view", "covar", snap.mode);
  }
  const blocks = attrBlocks(covar);
  const head = blocks
    .map((b) => `<th>${esc(b.key)}</th>`)
    .join("");
  const body = blocks
    .map((row) => {
      const cells = blocks
        .map((col) => {
          const dims = blockDims(row, col);
          const active =
            state.drill && state.drill.row === row.key && state.drill.col === col.key
              ? " drilled"
              : "";
          const value =
            dims === 0 ? fmt(covar.xtx[row.indices[0]][col.indices[0]]) : `${dims}D`;
          return (
            `<td class="cell dims-${dims}${active}" data-cell="${esc(row.key)}|${esc(col.key)}"` +
            ` title="${esc(row.key)} × ${esc(col.key)}">${value}</td>`
          );
        })
        .join("");
      return `<tr><th>${esc(row.key)}</th>${cells}</tr>`;
    })
    .join("");
  const theta = covar.features
    .map((f, i) => {
      const dims = f.category !== null ? 1 : 0;
      return (
        `<tr><td class="dims-${dims}">${esc(f.name)}</td>` +
        `<td class="num" title="${model.theta[i]}">${fmt(model.theta[i])}</td></tr>`
      );
    })
    .join("");
  return (
    steeringForm(state, snap, ["label", "lambda", "features"]) +
    `<div class="cols"><div>` +
    `<h2>aggregate matrix · label ${esc(covar.label)} · n=${fmt(covar.n)}</h2>` +
    `<table class="grid"><thead><tr><th></th>${head}</tr></thead><tbody>${body}</tbody></table>` +
    `<p class="legend"><span class="dims-0">0D</span> continuous×continuous ` +
    `<span class="dims-1">1D</span> mixed <span class="dims-2">2D</span> categorical×categorical</p>` +
    renderDrill(state, covar) +
    `</div><div>` +
    `<h2>model</h2>` +
    `<table class="kv"><tbody>` +
    `<tr><td>lambda</td><td class="num">${fmt(model.lambda)}</td></tr>` +
    `<tr><td>iterations</td><td class="num">${fmt(model.iterations)}</td></tr>` +
    `<tr><td>gradient norm</td><td class="num">${fmt(model.grad_norm)}</td></tr>` +
    `<tr><td>tolerance</td><td class="num">${fmt(model.tol)}</td></tr>` +
    `<tr><td>converged</td><td>${model.converged ? "yes" : "no"}</td></tr>` +
    `</tbody></table>` +
    `<h2>parameters</h2>` +
    `<table class="theta"><tbody>${theta}</tbody></table>` +
    `</div></div>`
  );
}

/** The expanded entries behind one attribute-pair cell. */
function renderDrill(state: UiState, covar: CovarDoc): string {
  if (!state.drill) return "";
  const blocks = attrBlocks(covar);
  const row = blocks.find((b) => b.key === state.drill!.row);
  const col = blocks.find((b) => b.key === state.drill!.col);
  if (!row || !col) return "";
  const entries: string[] = [];
  for (const i of row.indices) {
    for (const j of col.indices) {
      entries.push(
        `<tr><td>${esc(covar.features[i].name)} × ${esc(covar.features[j].name)}</td>` +
          `<td class="num" title="${covar.xtx[i][j]}">${fmt(covar.xtx[i][j])}</td></tr>`,
      );
    }
  }
  return (
    `<h3>cell ${esc(row.key)} × ${esc(col.key)} · ${entries.length} entries</h3>` +
    `<table class="drill"><tbody>${entries.join("")}</tbody></table>`
  );
}

// ---------------------------------------------------------------------------
// Dependence tree
// ---------------------------------------------------------------------------

function renderChowLiuTab(snap: Snapshot): string {
  const mi = snap.analytics.mi;
  const cl = snap.analytics.chow_liu;
  if (!mi || !cl) {
    return needsMode("the dependence view", "mi", snap.mode);
  }
  return (
    `<div class="cols"><div><h2>pairwise mutual information</h2>${miHeatmap(mi)}` +
    `<p class="legend">diagonal holds each attribute's entropy; shading is relative to ` +
    `this snapshot's largest pairwise value</p></div>` +
    `<div><h2>dependence tree · total weight ${fmt(cl.total_weight)}</h2>` +
    `${chowLiuSvg(mi.attrs, cl)}</div></div>`
  );
}

export function miHeatmap(mi: MiDoc): string {
  const n = mi.attrs.length;
  let max = 0;
  for (let i = 0; i < n; i++)
    for (let j = 0; j < n; j++)
      if (i !== j && mi.values[i][j] > max) max = mi.values[i][j];
  const head = mi.attrs.map((a) => `<th>${esc(a)}</th>`).join("");
  const rows = mi.attrs
    .map((a, i) => {
      const cells = mi.attrs
        .map((b, j) => {
          const v = mi.values[i][j];
          if (i === j) {
            return `<td class="diag" title="H(${esc(a)}) = ${v}">${fmt(v)}</td>`;
          }
          const alpha = heatAlpha(v, max);
          return (
            `<td class="heat" style="background:rgba(37,99,235,${alpha.toFixed(3)})"` +
            ` title="I(${esc(a)};${esc(b)}) = ${v}">${fmt(v)}</td>`
          );
        })
        .join("");
      return `<tr><th>${esc(a)}</th>${cells}</tr>`;
    })
    .join("");
  return (
    `<table class="heatmap"><thead><tr><th></th>${head}</tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function chowLiuSvg(attrs: string[], cl: ChowLiuDoc): string {
  const n = attrs.length;
  if (n === 0) return '<p class="dim">no attributes</p>';
  const size = 320;
  const cx = size / 2;
  const r = size / 2 - 40;
  const pos = new Map<string, [number, number]>();
  attrs.forEach((a, k) => {
    const ang = (2 * Math.PI * k) / n - Math.PI / 2;
    pos.set(a, [cx + r * Math.cos(ang), cx + r * Math.sin(ang)]);
  });
  const maxW = cl.edges.reduce((m, [, , w]) => (w > m ? w : m), 0);
  const lines = cl.edges
    .map(([a, b, w]) => {
      const [x1, y1] = pos.get(a)!;
      const [x2, y2] = pos.get(b)!;
      const width = maxW > 0 ? 1 + 3 * (w / maxW) : 1;
      return (
        `<line x1="${x1.toFixed(1)}" y1="${y1.toFixed(1)}" x2="${x2.toFixed(1)}" y2="${y2.toFixed(1)}"` +
        ` stroke-width="${width.toFixed(2)}" class="edge"><title>${esc(a)} — ${esc(b)}: ${w}</title></line>` +
        `<text x="${((x1 + x2) / 2).toFixed(1)}" y="${((y1 + y2) / 2).toFixed(1)}" class="edge-w">${fmt(w)}</text>`
      );
    })
    .join("");
  const nodes = attrs
    .map((a) => {
      const [x, y] = pos.get(a)!;
      return (
        `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="16" class="node"></circle>` +
        `<text x="${x.toFixed(1)}" y="${(y + 4).toFixed(1)}" class="node-label">${esc(a)}</text>`
      );
    })
    .join("");
  return `<svg class="tree" viewBox="0 0 ${size} ${size}">${lines}${nodes}</svg>`;
}

// ---------------------------------------------------------------------------
// Maintenance
// ---------------------------------------------------------------------------

function renderMaintenanceTab(state: UiState, snap: Snapshot): string {
  const doc = state.viewtree;
  if (!doc) return '<p class="dim">view tree not loaded yet</p>';
  const selected = state.sqlNode
    ? doc.nodes.find((nd) => nd.id === state.sqlNode)
    : undefined;
  const sql = selected
    ? `<h3>${esc(selected.id)}</h3><pre class="sql">${esc(selected.sql ?? "(no definition)")}</pre>`
    : '<p class="dim">click a node to see its definition</p>';
  return (
    `<div class="cols"><div><h2>view tree</h2>${viewTreeSvg(doc)}</div>` +
    `<div><h2>run</h2>${runStats(snap)}${sql}</div></div>`
  );
}

function runStats(snap: Snapshot): string {
  const bins = snap.bins
    ? Object.entries(snap.bins)
        .map(([a, b]) => `<tr><td>bins(${esc(a)})</td><td class="num">[${fmt(b.lo)}, ${fmt(b.hi)}] × ${b.k}</td></tr>`)
        .join("")
    : "";
  return (
    `<table class="kv"><tbody>` +
    `<tr><td>snapshot</td><td class="num">#${snap.seq}</td></tr>` +
    `<tr><td>batches applied</td><td class="num">${fmt(snap.batches_applied)}</td></tr>` +
    `<tr><td>updates in last batch</td><td class="num">${fmt(snap.batch_updates)}</td></tr>` +
    `<tr><td>updates total</td><td class="num">${fmt(snap.updates_applied)}</td></tr>` +
    `<tr><td>propagate</td><td class="num">${fmt(snap.timing.propagate_s)}s</td></tr>` +
    `<tr><td>analytics</td><td class="num">${fmt(snap.timing.analytics_s)}s</td></tr>` +
    `<tr><td>root hash</td><td class="num">${esc(snap.root_hash.slice(0, 12))}…</td></tr>` +
    bins +
    `</tbody></table>`
  );
}

interface LaidOutNode {
  x: number;
  y: number;
  id: string;
}

export function viewTreeSvg(doc: ViewTreeDoc): string {
  if (doc.nodes.length === 0) return '<p class="dim">empty tree</p>';
  const children = new Map<string, string[]>();
  for (const [p, c] of doc.edges) {
    const l = children.get(p) ?? [];
    l.push(c);
    children.set(p, l);
  }
  // depth per node, walking from the root (serialized first)
  const depth = new Map<string, number>([[doc.nodes[0].id, 0]]);
  const order: string[] = [doc.nodes[0].id];
  for (let k = 0; k < order.length; k++) {
    for (const c of children.get(order[k]) ?? []) {
      depth.set(c, (depth.get(order[k]) ?? 0) + 1);
      order.push(c);
    }
  }
  const perDepth = new Map<number, string[]>();
  for (const id of order) {
    const d = depth.get(id)!;
    const l = perDepth.get(d) ?? [];
    l.push(id);
    perDepth.set(d, l);
  }
  const w = 150;
  const h = 86;
  const maxRow = Math.max(...[...perDepth.values()].map((l) => l.length));
  const width = Math.max(maxRow * w + 30, 330);
  const height = perDepth.size * h + 20;
  const laid = new Map<string, LaidOutNode>();
  for (const [d, ids] of perDepth) {
    const step = width / (ids.length + 1);
    ids.forEach((id, k) => {
      laid.set(id, { id, x: step * (k + 1), y: 40 + d * h });
    });
  }
  const byId = new Map(doc.nodes.map((nd) => [nd.id, nd]));
  const lines = doc.edges
    .map(([p, c]) => {
      const a = laid.get(p)!;
      const b = laid.get(c)!;
      return `<line x1="${a.x}" y1="${a.y + 18}" x2="${b.x}" y2="${b.y - 18}" class="edge"></line>`;
    })
    .join("");
  const boxes = order
    .map((id) => {
      const nd = byId.get(id)!;
      const { x, y } = laid.get(id)!;
      const kind = nd.relation ? "leaf" : "view";
      const title = nd.relation ? `${nd.id} · ${nd.relation}` : nd.id;
      const key = nd.key.length ? `(${nd.key.join(", ")})` : "(∅)";
      return (
        `<g class="vnode vnode-${kind}" data-node="${esc(id)}">` +
        `<rect x="${x - 66}" y="${y - 18}" width="132" height="36" rx="6"></rect>` +
        `<text x="${x}" y="${y - 4}" class="vnode-title">${esc(title)}</text>` +
        `<text x="${x}" y="${y + 11}" class="vnode-sub">${esc(key)} · ${fmt(nd.count)} keys</text>` +
        `</g>`
      );
    })
    .join("");
  return `<svg class="viewtree" viewBox="0 0 ${width} ${height}">${lines}${boxes}</svg>`;
}

// ---------------------------------------------------------------------------
// Steering form
// ---------------------------------------------------------------------------

/** Attributes offerable as label / feature choices, from this snapshot only. */
export function candidateAttrs(snap: Snapshot): string[] {
  const a = snap.analytics;
  if (a.mi) return [...a.mi.attrs];
  const out: string[] = [];
  if (a.covar) {
    for (const f of a.covar.features) {
      if (f.attr !== null && !out.includes(f.attr)) out.push(f.attr);
    }
    if (!out.includes(a.covar.label)) out.push(a.covar.label);
    for (const f of snap.steering.features ?? []) {
      if (!out.includes(f)) out.push(f);
    }
  }
  return out;
}

function steeringForm(
  state: UiState,
  snap: Snapshot,
  fields: ("label" | "threshold" | "lambda" | "features")[],
): string {
  const f = state.form;
  const dis = state.steerPending ? " disabled" : "";
  const attrs = candidateAttrs(snap);
  const parts: string[] = [];
  if (fields.includes("label")) {
    const opts = attrs
      .map(
        (a) =>
          `<option value="${esc(a)}"${a === f.label ? " selected" : ""}>${esc(a)}</option>`,
      )
      .join("");
    parts.push(
      `<label>label <select id="steer-label"${dis}>${opts}</select></label>`,
    );
  }
  if (fields.includes("threshold")) {
    parts.push(
      `<label>threshold <input id="steer-threshold" type="number" step="0.01" value="${esc(f.threshold)}"${dis}></label>`,
    );
  }
  if (fields.includes("lambda")) {
    parts.push(
      `<label>lambda <input id="steer-lambda" type="number" step="0.01" min="0" value="${esc(f.lambda)}"${dis}></label>`,
    );
  }
  if (fields.includes("features")) {
    const boxes = attrs
      .filter((a) => a !== f.label)
      .map((a) => {
        const on = f.allFeatures || f.features.includes(a);
        return (
          `<label class="feat"><input type="checkbox" data-feature="${esc(a)}"` +
          `${on ? " checked" : ""}${f.allFeatures ? " disabled" : ""}> ${esc(a)}</label>`
        );
      })
      .join("");
    parts.push(
      `<fieldset class="features"><legend>features</legend>` +
        `<label class="feat"><input type="checkbox" id="steer-all-features"${f.allFeatures ? " checked" : ""}${dis}> all</label>` +
        `${boxes}<button id="steer-apply-features"${f.allFeatures ? " disabled" : dis}>apply</button></fieldset>`,
    );
  }
  const pause = snap.steering.paused
    ? `<button id="steer-resume"${dis}>resume</button>`
    : `<button id="steer-pause"${dis}>pause</button>`;
  return `<section class="steering">${parts.join("")}${pause}</section>`;
}

function needsMode(what: string, mode: string, current: string): string {
  return `<p class="dim">${esc(what)} needs a run in <code>${esc(mode)}</code> mode; this run uses <code>${esc(current)}</code></p>`;
}
