/**
 * Annotation-session state machine.
 *
 * One search may be in flight at a time; feedback submission is disabled
 * until a response exists and while a search is pending. Cards keep the
 * server's order (recency ordering is server-authoritative). Judgments are
 * tri-state and start unset; unset cards are simply absent from the
 * feedback body. After an acknowledged submit, the cards lock and the
 * acknowledgement id is shown.
 */

import { buildFeedbackBody } from "./api.js";
import type {
  FeedbackAck,
  Judgment,
  JudgmentEntry,
  ResultCardView,
  SearchResponse,
} from "./types.js";

export type SessionStatus = "idle" | "searching" | "ready" | "submitting" | "submitted";

const JUDGMENT_CYCLE: Record<Judgment, Judgment> = {
  unset: "relevant",
  relevant: "irrelevant",
  irrelevant: "unset",
};

export class AnnotationSession {
  status: SessionStatus = "idle";
  queryText = "";
  queryId: string | null = null;
  cards: ResultCardView[] = [];
  commentDraft = "";
  annotator = "";
  banner: string | null = null;
  feedbackId: string | null = null;
  degradedFlags: string[] = [];

  get searchPending(): boolean {
    return this.status === "searching";
  }

  get locked(): boolean {
    return this.status === "submitting" || this.status === "submitted";
  }

  /** Begin a search; refuses empty queries and overlapping requests. */
  startSearch(queryText: string): boolean {
    if (queryText.trim() === "" || this.searchPending) {
      return false;
    }
    this.queryText = queryText;
    this.status = "searching";
    this.banner = null;
    return true;
  }

  /** Render the response: cards in server order, judgments reset to unset. */
  searchSucceeded(response: SearchResponse): void {
    this.queryId = response.query_id;
    this.cards = response.results.map((r) => ({
      paragraphId: r.paragraph_id,
      title: r.title,
      filingDate: r.filing_date,
      summary: r.summary,
      snippet: r.snippet,
      rank: r.rank,
      judgment: "unset",
    }));
    this.degradedFlags = response.pipeline_trace.flags.filter((f) =>
      f.includes("degraded"),
    );
    this.commentDraft = "";
    this.feedbackId = null;
    this.status = "ready";
  }

  /** Show the error banner; the query text stays put for a retry. */
  searchFailed(message: string): void {
    this.banner = message;
    this.status = this.cards.length > 0 ? "ready" : "idle";
  }

  setJudgment(paragraphId: string, judgment: Judgment): void {
    if (this.locked) return;
    const card = this.cards.find((c) => c.paragraphId === paragraphId);
    if (card) card.judgment = judgment;
  }

  /** unset -> relevant -> irrelevant -> unset. */
  cycleJudgment(paragraphId: string): void {
    const card = this.cards.find((c) => c.paragraphId === paragraphId);
    if (card && !this.locked) {
      card.judgment = JUDGMENT_CYCLE[card.judgment];
    }
  }

  setComment(text: string): void {
    if (!this.locked) this.commentDraft = text;
  }

  /** Judged cards only, in server order; unset cards are absent. */
  judgedEntries(): JudgmentEntry[] {
    return this.cards
      .filter((c) => c.judgment !== "unset")
      .map((c) => ({ paragraph_id: c.paragraphId, label: c.judgment as JudgmentEntry["label"] }));
  }

  get canSubmitFeedback(): boolean {
    return (
      this.status === "ready" &&
      this.queryId !== null &&
      (this.judgedEntries().length > 0 || this.commentDraft.trim() !== "")
    );
  }

  /** The exact bytes to POST to /v1/feedback. */
  buildFeedbackRequest(): string {
    if (this.queryId === null) {
      throw new Error("no search response to give feedback on");
    }
    return buildFeedbackBody(
      this.queryId,
      this.judgedEntries(),
      this.commentDraft,
      this.annotator,
    );
  }

  beginSubmit(): void {
    this.status = "submitting";
    this.banner = null;
  }

  /** Lock the cards and surface the acknowledgement id. */
  feedbackAcked(ack: FeedbackAck): void {
    this.feedbackId = ack.feedback_id;
    this.status = "submitted";
  }

  /** Rejection: banner up, nothing else changes, the user can correct. */
  feedbackFailed(message: string): void {
    this.banner = message;
    this.status = "ready";
  }
}
