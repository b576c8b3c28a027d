// Wire types mirroring the backend's JSON payloads (see docs/api.md and
// docs/examples/ in the repository root). The UI renders these fields as-is
// and computes no metric of its own.

export const OUTCOME_LABELS = [
  "Correct",
  "FP1_MissingContent",
  "FP2_MissedTopRanked",
  "FP3_NotInContext",
  "FP4_NotExtracted",
  "FP5_WrongFormat",
  "FP6_IncorrectSpecificity",
  "FP7_Incomplete",
  "Unknown",
] as const;

export type OutcomeLabel = (typeof OUTCOME_LABELS)[number];

export const METRICS = ["accuracy", "recall", "mrr", "map"] as const;
export type Metric = (typeof METRICS)[number];

export function shortLabel(label: string): string {
  const i = label.indexOf("_");
  return i === -1 ? label : label.slice(0, i);
}

export interface SweepSummary {
  sweep_id: string;
  status: string;
  n_configs: number;
  n_runs: number;
  n_errors: number;
}

export interface MetricReport {
  config_id: string;
  accuracy: number;
  recall_at_k: number;
  mrr: number;
  map: number;
  n_questions: number;
  n_errors: number;
}

export interface OverviewConfig {
  config_id: string;
  options: Record<string, string>;
  metrics: MetricReport;
  histogram: Record<string, number>;
}

export interface ComponentAggregate {
  component_field: string;
  option_value: string;
  mean_metric: number;
  n_configs: number;
}

export interface OverviewPayload {
  sweep_id: string;
  metric: Metric;
  configs: OverviewConfig[];
  aggregates: ComponentAggregate[];
}

export interface TransitionMatrixPayload {
  config_a: string;
  config_b: string;
  labels: string[];
  counts: number[][];
  question_ids: Record<string, string[]>;
}

export interface InstanceRow {
  question_id: string;
  text: string;
  label_a: string;
  label_b: string;
  glyph_a: number;
  glyph_b: number;
}

export interface InstanceListPayload {
  total: number;
  limit: number;
  offset: number;
  questions: InstanceRow[];
}

export interface TrackEntry {
  chunk_id: string;
  rank: number;
  score: number;
  in_top_k: boolean;
  text: string;
  evidence_spans: [number, number][];
  support_spans: [number, number][];
}

export interface TrackSide {
  config_id: string;
  outcome: string;
  final_answer: string;
  glyph_fraction: number;
  track: TrackEntry[];
}

export interface ChunkLink {
  a: string;
  b: string;
  jaccard: number;
}

export interface PerturbationRow {
  stored_id: string;
  request: {
    config_id: string;
    question_id: string;
    context_chunk_ids: string[];
    note: string;
  };
  result: PerturbationResult;
}

export interface InstancePayload {
  question_id: string;
  threshold: number;
  a: TrackSide;
  b: TrackSide;
  links: ChunkLink[];
  question: { question_id: string; text: string; ground_truth: string };
  history: PerturbationRow[];
}

export interface PerturbationRequest {
  config_id: string;
  question_id: string;
  context_chunk_ids: string[];
  note?: string;
  allow_empty_context?: boolean;
}

export interface PerturbationResult {
  answer_orig: string;
  answer_pert: string;
  verdict_orig: boolean;
  verdict_pert: boolean;
  context_label: string;
  stored_id: string;
  raw_pert: string;
}
