/** JSON shapes served by the engine's HTTP endpoints. */

export interface FeatureJson {
  attr: string | null; // null marks the intercept column
  category: string | number | null;
  name: string;
}

export interface CovarDoc {
  n: number;
  features: FeatureJson[];
  xtx: number[][];
  xty: number[];
  yty: number;
  label: string;
}

export interface ModelDoc {
  theta: number[];
  lambda: number;
  iterations: number;
  grad_norm: number;
  tol: number;
  converged: boolean;
}

export interface RankEntry {
  attr: string;
  mi: number;
  selected: boolean;
}

export interface SelectionDoc {
  label: string;
  threshold: number;
  ranking: RankEntry[];
}

export interface MiDoc {
  attrs: string[];
  values: number[][]; // symmetric; diagonal carries entropies
}

export interface ChowLiuDoc {
  edges: [string, string, number][];
  total_weight: number;
}

export interface AnalyticsDoc {
  root_count?: number;
  covar?: CovarDoc;
  model?: ModelDoc;
  mi?: MiDoc;
  selection?: SelectionDoc;
  chow_liu?: ChowLiuDoc;
  error?: string; // set when the aggregate root went empty
}

export interface SteeringDoc {
  label: string | null;
  threshold: number;
  lambda: number;
  features: string[] | null; // null = all candidates
  paused: boolean;
}

export interface Snapshot {
  seq: number;
  mode: "count" | "covar" | "mi";
  oracle: boolean;
  batches_applied: number;
  batch_updates: number;
  updates_applied: number;
  root: unknown;
  root_hash: string;
  analytics: AnalyticsDoc;
  steering: SteeringDoc;
  timing: { propagate_s: number; analytics_s: number };
  throughput_updates_per_s: number | null;
  bins?: Record<string, { lo: number; hi: number; k: number }>;
}

export interface ViewNodeDoc {
  id: string;
  key: string[];
  relation?: string;
  count: number;
  sql?: string;
  bytes?: number;
}

export interface ViewTreeDoc {
  nodes: ViewNodeDoc[]; // root first (pre-order)
  edges: [string, string][]; // [parent, child]
}

export type StreamEvent =
  | { type: "snapshot"; seq: number; payload: Snapshot }
  | { type: "gap"; missed_from: number; missed_to: number; seq: number };

export interface SteerBody {
  type:
    | "set_label"
    | "set_threshold"
    | "set_lambda"
    | "set_features"
    | "pause"
    | "resume";
  value?: unknown;
}
