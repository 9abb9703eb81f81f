/** Wire shapes for the /v1 recommendation API. */

export interface Weights {
  lambda_n: number;
  lambda_p: number;
  lambda_m: number;
}

export interface RecommendRequest {
  context: string;
  k?: number;
  mode?: "LR" | "QR";
  weights?: Weights;
}

export interface QuotationView {
  id: string;
  text: string;
  author: string | null;
  source_info: string | null;
  language: string;
  analysis: string | null;
  deep_meaning: string | null;
  labels: Record<string, unknown> | null;
  popularity_count: number | null;
  label_status: string;
}

/** Per-token novelty evidence returned alongside each result.  The
 *  three arrays are parallel; `truncated` marks traces cut at the
 *  server's token limit. */
export interface TraceView {
  token_texts: string[];
  w_tilde: number[];
  r: number[];
  truncated: boolean;
}

export interface ResultView {
  quotation: QuotationView;
  s_final: number;
  s_n: number;
  s_p: number;
  s_m: number;
  rank: number;
  trace: TraceView;
}

export interface RecommendResponse {
  results: ResultView[];
  timings_ms: Record<string, number>;
  context_deep_meaning: string | null;
}
