/** Wire types mirroring the service's JSON schemas. */

export interface SearchOptions {
  k?: number;
  expand?: boolean;
  rerank?: boolean;
}

export interface WireResult {
  paragraph_id: string;
  title: string;
  filing_date: string | null;
  snippet: string;
  summary: string | null;
  score: number;
  rank: number;
}

export interface PipelineTrace {
  flags: string[];
  expanded: boolean;
  reranked: boolean;
  degraded: boolean;
  timings?: Record<string, number>;
}

export interface SearchResponse {
  query_id: string;
  results: WireResult[];
  pipeline_trace: PipelineTrace;
}

export interface FeedbackAck {
  feedback_id: string;
}

export interface ApiErrorBody {
  code: number;
  message: string;
}

/** Tri-state per-result judgment; "unset" is never transmitted. */
export type Judgment = "unset" | "relevant" | "irrelevant";

export interface JudgmentEntry {
  paragraph_id: string;
  label: "relevant" | "irrelevant";
}

/** One rendered search result with its annotation state. */
export interface ResultCardView {
  paragraphId: string;
  title: string;
  filingDate: string | null;
  summary: string | null;
  snippet: string;
  rank: number;
  judgment: Judgment;
}
