/**
 * DOM wiring: a search box, result cards with tri-state judgment buttons,
 * a freeform comment box, and the feedback submit flow. All state lives in
 * AnnotationSession; this layer only renders it and forwards events.
 */

import { ApiClient, ApiError } from "./api.js";
import { AnnotationSession } from "./session.js";
import type { Judgment } from "./types.js";

const JUDGMENT_LABELS: Record<Judgment, string> = {
  unset: "not judged",
  relevant: "relevant",
  irrelevant: "irrelevant",
};

export function mountApp(root: HTMLElement, client: ApiClient): AnnotationSession {
  const session = new AnnotationSession();

  root.innerHTML = `
    <form id="search-form">
      <input id="query" type="text" placeholder="search past briefs and directives" size="60" />
      <button id="search-button" type="submit">Search</button>
    </form>
    <div id="banner" hidden></div>
    <div id="degraded" hidden></div>
    <ol id="cards"></ol>
    <div id="feedback" hidden>
      <textarea id="comment" rows="3" cols="60" placeholder="freeform feedback (optional)"></textarea>
      <br/>
      <button id="submit-feedback" disabled>Submit feedback</button>
      <span id="ack"></span>
    </div>
  `;

  const queryInput = root.querySelector<HTMLInputElement>("#query")!;
  const searchButton = root.querySelector<HTMLButtonElement>("#search-button")!;
  const banner = root.querySelector<HTMLDivElement>("#banner")!;
  const degraded = root.querySelector<HTMLDivElement>("#degraded")!;
  const cardList = root.querySelector<HTMLOListElement>("#cards")!;
  const feedbackBox = root.querySelector<HTMLDivElement>("#feedback")!;
  const comment = root.querySelector<HTMLTextAreaElement>("#comment")!;
  const submitButton = root.querySelector<HTMLButtonElement>("#submit-feedback")!;
  const ack = root.querySelector<HTMLSpanElement>("#ack")!;

  function render() {
    banner.hidden = session.banner === null;
    banner.textContent = session.banner ?? "";
    degraded.hidden = session.degradedFlags.length === 0;
    degraded.textContent = session.degradedFlags.length
      ? `degraded: ${session.degradedFlags.join(", ")}`
      : "";
    searchButton.disabled = session.searchPending;

    cardList.innerHTML = "";
    for (const card of session.cards) {
      const li = document.createElement("li");
      const date = card.filingDate ?? "undated";
      const summary = card.summary ?? card.snippet;
      li.innerHTML = `
        <strong>${card.title}</strong> <em>${date}</em><br/>
        <span>${summary}</span><br/>
      `;
      const judge = document.createElement("button");
      judge.type = "button";
      judge.textContent = JUDGMENT_LABELS[card.judgment];
      judge.disabled = session.locked;
      judge.addEventListener("click", () => {
        session.cycleJudgment(card.paragraphId);
        render();
      });
      li.appendChild(judge);
      cardList.appendChild(li);
    }

    feedbackBox.hidden = session.cards.length === 0;
    comment.disabled = session.locked;
    submitButton.disabled = !session.canSubmitFeedback;
    ack.textContent = session.feedbackId ? `recorded as ${session.feedbackId}` : "";
  }

  root.querySelector<HTMLFormElement>("#search-form")!.addEventListener("submit", (ev) => {
    ev.preventDefault();
    if (!session.startSearch(queryInput.value)) {
      render();
      return;
    }
    render();
    client
      .search(session.queryText, { k: 5 })
      .then((response) => session.searchSucceeded(response))
      .catch((err) => {
        session.searchFailed(err instanceof ApiError ? err.message : "search unavailable");
      })
      .finally(render);
  });

  comment.addEventListener("input", () => {
    session.setComment(comment.value);
    render();
  });

  submitButton.addEventListener("click", () => {
    const body = session.buildFeedbackRequest();
    session.beginSubmit();
    render();
    client
      .submitFeedback(body)
      .then((a) => session.feedbackAcked(a))
      .catch((err) => {
        session.feedbackFailed(err instanceof ApiError ? err.message : "feedback not stored");
      })
      .finally(render);
  });

  render();
  return session;
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) {
    mountApp(root, new ApiClient(""));
  }
}
