/** Hand-built documents shaped like the engine's JSON, for state/render tests. */

import type { Snapshot, SteeringDoc, ViewTreeDoc } from "../src/types.js";

function steering(over: Partial<SteeringDoc> = {}): SteeringDoc {
  return {
    label: null,
    threshold: 0.05,
    lambda: 0.1,
    features: null,
    paused: false,
    ...over,
  };
}

export function countSnapshot(seq = 1, over: Partial<Snapshot> = {}): Snapshot {
  return {
    seq,
    mode: "count",
    oracle: false,
    batches_applied: seq,
    batch_updates: 10,
    updates_applied: 10 * seq,
    root: 42,
    root_hash: "abcdef0123456789",
    analytics: { root_count: 42 },
    steering: steering(),
    timing: { propagate_s: 0.001, analytics_s: 0.0 },
    throughput_updates_per_s: 5000.0,
    ...over,
  };
}

export function miSnapshot(seq = 1, over: Partial<Snapshot> = {}): Snapshot {
  // three attributes; B-C is the strongest pair, A nearly independent
  const attrs = ["A", "B", "C"];
  const values = [
    [1.1, 0.02, 0.3],
    [0.02, 0.9, 0.6],
    [0.3, 0.6, 1.4],
  ];
  return {
    seq,
    mode: "mi",
    oracle: false,
    batches_applied: seq,
    batch_updates: 10,
    updates_applied: 10 * seq,
    root: null,
    root_hash: "1111222233334444",
    analytics: {
      mi: { attrs, values },
      selection: {
        label: "A",
        threshold: 0.05,
        ranking: [
          { attr: "C", mi: 0.3, selected: true },
          { attr: "B", mi: 0.02, selected: false },
        ],
      },
      chow_liu: {
        edges: [
          ["B", "C", 0.6],
          ["A", "C", 0.3],
        ],
        total_weight: 0.9,
      },
    },
    steering: steering({ label: "A" }),
    timing: { propagate_s: 0.002, analytics_s: 0.001 },
    throughput_updates_per_s: 4000.0,
    bins: { A: { lo: 0.0, hi: 10.0, k: 8 } },
    ...over,
  };
}

export function covarSnapshot(seq = 1, over: Partial<Snapshot> = {}): Snapshot {
  // intercept + continuous X + categorical C with two categories
  const features = [
    { attr: null, category: null, name: "intercept" },
    { attr: "X", category: null, name: "X" },
    { attr: "C", category: "a", name: "C=a" },
    { attr: "C", category: "b", name: "C=b" },
  ];
  const xtx = [
    [10.0, 5.0, 6.0, 4.0],
    [5.0, 8.0, 3.0, 2.0],
    [6.0, 3.0, 6.0, 0.0],
    [4.0, 2.0, 0.0, 4.0],
  ];
  return {
    seq,
    mode: "covar",
    oracle: false,
    batches_applied: seq,
    batch_updates: 10,
    updates_applied: 10 * seq,
    root: null,
    root_hash: "5555666677778888",
    analytics: {
      covar: { n: 10.0, features, xtx, xty: [20.0, 11.0, 12.0, 8.0], yty: 55.0, label: "Y" },
      model: {
        theta: [1.5, 0.25, -0.5, 0.75],
        lambda: 0.1,
        iterations: 137,
        grad_norm: 1.2e-7,
        tol: 1e-6,
        converged: true,
      },
    },
    steering: steering({ label: "Y" }),
    timing: { propagate_s: 0.003, analytics_s: 0.002 },
    throughput_updates_per_s: 3000.0,
    ...over,
  };
}

export function viewtreeDoc(): ViewTreeDoc {
  return {
    nodes: [
      { id: "V", key: [], count: 1, sql: "SELECT SUM(...) FROM V_R NATURAL JOIN V_S" },
      { id: "V_R", key: ["A"], relation: "R", count: 7, sql: "SELECT A, SUM(...) FROM R GROUP BY A" },
      { id: "V_S", key: ["A"], relation: "S", count: 9, sql: "SELECT A, SUM(...) FROM S GROUP BY A" },
    ],
    edges: [
      ["V", "V_R"],
      ["V", "V_S"],
    ],
  };
}
