/**
 * HTTP client for the retrieval service.
 *
 * Request bodies are built by the exported build* functions with a fixed
 * key order and compact JSON, so the bytes on the wire are reproducible;
 * the contract tests pin them against recorded fixtures.
 */

import type {
  ApiErrorBody,
  FeedbackAck,
  JudgmentEntry,
  SearchOptions,
  SearchResponse,
} from "./types.js";

export type FetchLike = (url: string, init: RequestInit) => Promise<Response>;

/** Server-reported failure, carrying the {code, message} error body. */
export class ApiError extends Error {
  readonly code: number;

  constructor(body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
  }
}

export function buildSearchBody(queryText: string, options: SearchOptions = {}): string {
  const body: Record<string, unknown> = { query_text: queryText };
  if (options.k !== undefined) body.k = options.k;
  if (options.expand !== undefined) body.expand = options.expand;
  if (options.rerank !== undefined) body.rerank = options.rerank;
  return JSON.stringify(body);
}

export function buildFeedbackBody(
  queryId: string,
  judgments: JudgmentEntry[],
  comment: string,
  annotator: string,
): string {
  const body: Record<string, unknown> = {
    query_id: queryId,
    judgments: judgments.map((j) => ({ paragraph_id: j.paragraph_id, label: j.label })),
  };
  if (comment !== "") body.comment = comment;
  if (annotator !== "") body.annotator = annotator;
  return JSON.stringify(body);
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl: FetchLike = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async post<T>(path: string, body: string): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(payload as ApiErrorBody);
    }
    return payload as T;
  }

  search(queryText: string, options: SearchOptions = {}): Promise<SearchResponse> {
    return this.post<SearchResponse>("/v1/search", buildSearchBody(queryText, options));
  }

  submitFeedback(body: string): Promise<FeedbackAck> {
    return this.post<FeedbackAck>("/v1/feedback", body);
  }
}
