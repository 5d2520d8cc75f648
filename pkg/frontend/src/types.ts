/** Wire types mirroring the session service API (docs/api.md). */

export interface ImagePayload {
  kind: "image";
  width: number;
  height: number;
  palette_size: number;
  grid: number[][];
}

export interface DocumentPayload {
  kind: "document";
  tokens: number[];
  vocab_size: number;
  words?: string[];
}

export type Payload = ImagePayload | DocumentPayload;

export interface ExplanationView {
  components: [number, number][];
  intercept: number;
  k: number;
  target_label: number;
}

export interface OracleHint {
  label: number;
  flagged: number[];
}

export interface QueryPayload {
  session_id: string;
  status: string;
  done: boolean;
  iteration?: number;
  iteration_done: number;
  budget: number;
  burn_in?: boolean;
  class_names: string[];
  instance?: { id: string; payload: Payload };
  predicted_label?: number;
  explanation?: ExplanationView;
  component_cells?: Record<string, number[]>;
  component_words?: Record<string, string>;
  oracle_hint?: OracleHint;
}

export interface MetricRecord {
  t: number;
  query_id: number;
  case: number;
  predictive: number;
  expl_f1_query: number;
  expl_f1_cum: number;
  counterexamples_added: number;
  expl_f1_test: number | null;
  alpha0: number | null;
  alpha1: number | null;
  residual_norm: number | null;
}

export interface MetricsPayload {
  session_id: string;
  status: string;
  history: MetricRecord[];
}

export interface FeedbackRequest {
  iteration: number;
  label: number;
  flagged: number[];
}

export interface ApiError {
  code: string;
  message: string;
  field: string | null;
}
