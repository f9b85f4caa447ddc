/** JSON document shapes shared with the engine. */

export const BUNDLE_SCHEMA = "concord.bundle/1";
export const CERT_SCHEMA = "concord.certificates/1";
export const WEIGHTS_SCHEMA = "concord.weights/1";
export const PERTURBATION_SCHEMA = "concord.perturbation/1";

export interface MetricDefinition {
  name: string;
  orientation: "higher" | "lower";
  gamma: number;
  bounds: [number, number] | null;
  report_only: boolean;
  requires_group: boolean;
}

export interface StrategyDoc {
  name: string;
  kind: string;
  actor?: string;
  phi?: string;
  selector?: string;
  params?: Record<string, unknown>;
}

export interface FoldDoc {
  fold: number;
  raw: Record<string, Record<string, number>>;
  normalized: Record<string, Record<string, number>>;
  composite: Record<string, number>;
  val_indices: number[];
  decisions: Record<string, number[][]>;
  truths: number[];
  groups: number[] | null;
  tensor: number[][][];
}

export interface Bundle {
  schema: string;
  seed: number;
  k_folds: number;
  scenario: string | null;
  actors: string[];
  actions: string[];
  strategies: StrategyDoc[];
  metrics: MetricDefinition[];
  weights: Record<string, number>;
  folds: FoldDoc[];
  mean_composite: Record<string, number>;
  selected: string;
}

export interface CertificateEntry {
  rule_phi: string;
  smooth_score: number;
  gradient_term: number;
  curvature_term: number;
  bias_term: number;
  rlb: number;
  tau: number;
  tau_star: number;
  oracle_worst_case?: number;
}

export interface RankingDoc {
  sharp_scores: Record<string, number>;
  tau_stars: Record<string, number>;
  epsilons: Record<string, number>;
  min_gap: number;
  max_pair_error: number;
  verdict: "certified" | "not_certified";
  reason: string;
  probe_samples: number;
  probe_violations: number;
}

export interface CertGridEntry {
  delta: number;
  clip_bound: number;
  coalition?: string[];
  rules: Record<string, CertificateEntry>;
  ranking: RankingDoc;
}

export interface CertificatesDoc {
  schema: string;
  scenario: string | null;
  mu: number;
  coalition: string[];
  certified_metrics: Record<string, number>;
  report: CertGridEntry;
  grid: CertGridEntry[];
}

export interface RankedStrategy {
  name: string;
  composite: number;
  /** mean normalized score per metric across folds */
  perMetric: Record<string, number>;
}
