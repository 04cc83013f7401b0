/** Response shapes of the workbench API (mirrors the server contracts). */

export interface DatasetInfo {
  dataset_id: string;
  n_units: number;
  outcome: string;
  treatment: string | null;
  date: string | null;
  n_covariates: number;
}

export interface CovariateSpec {
  name: string;
  kind: "continuous" | "binary" | "categorical";
  categories?: string[];
}

export interface DatasetSchema {
  unit_id: string;
  outcome: string;
  treatment: string | null;
  date: string | null;
  covariates: CovariateSpec[];
}

export interface PreviewCounts {
  n_treated: number;
  n_control: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  field_errors: Record<string, string> | null;
}

export type RunStatus = "queued" | "running" | "succeeded" | "failed" | "cancelled";

export interface RunState {
  run_id: string;
  status: RunStatus;
  stage: string | null;
  progress: number;
  submitted_at: string;
  started_at: string | null;
  finished_at: string | null;
  error: { stage: string | null; code: string; message: string } | null;
}

export interface Histogram {
  name?: string;
  edges: number[];
  counts?: number[];
}

export interface GroupedHistogram {
  name: string;
  edges: number[];
  treated_before: number[];
  control_before: number[];
  treated_after: number[];
  control_after: number[];
}

export interface BalanceRow {
  name: string;
  smd_before: number | null;
  smd_after: number | null;
  ttest_before: [number | null, number | null];
  ttest_after: [number | null, number | null];
  note: string | null;
}

export interface ContingencyTable {
  name: string;
  categories: string[];
  treated_before: number[];
  control_before: number[];
  treated_after: number[];
  control_after: number[];
}

export interface DiagnosticsBundle {
  balance: BalanceRow[];
  balance_threshold: number;
  densities: GroupedHistogram[];
  score_hist: GroupedHistogram;
  contingency: ContingencyTable[];
  summary: Record<string, unknown>;
}

export interface ModelScore {
  split: string;
  auc: number;
  f1: number;
  confusion: { tp: number; fp: number; tn: number; fn: number };
  pr_curve: Array<[number, number]>;
}

export interface CandidateRow {
  base_features: string[];
  interactions: string[][];
  auc: number;
  f1: number;
  converged: boolean;
  stage: number;
}

export interface SweepSummaryRow {
  w: number;
  n_ok: number;
  injected_coef_mean: number | null;
  injected_coef_se: number | null;
  att_mean: number | null;
  att_shift_mean: number | null;
  coefficient_means: Record<string, number>;
}

export interface SensitivitySweep {
  grid: number[];
  replicates_per_w: number;
  seed: number;
  target: string;
  summary: SweepSummaryRow[];
}

export interface RunResults {
  att: number;
  ci_percentile: [number, number];
  ci_basic: [number, number];
  ci_symmetric: [number, number];
  alpha: number;
  bootstrap: { estimates: number[]; n_samples: number; seed: number };
  bootstrap_hist: { edges: number[]; counts: number[] };
  counts: {
    sample_size: number;
    n_treated: number;
    n_control: number;
    n_treated_matched: number;
    n_unmatched_treated: number;
    n_control_used: number;
    n_excluded_off_support: number;
    history_days: number | null;
  };
  model: {
    base_features: string[];
    interactions: string[][];
    coefficients: Record<string, number>;
    converged: boolean;
  };
  model_evaluation: { train: ModelScore; test: ModelScore };
  selection: { stage1: CandidateRow[]; stage2: CandidateRow[]; chosen: CandidateRow; top_k: number };
  diagnostics: DiagnosticsBundle;
  sensitivity: SensitivitySweep | null;
  validation: { overlap_pass: boolean; n_excluded_off_support: number };
}
