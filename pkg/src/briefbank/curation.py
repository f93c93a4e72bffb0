"""Dataset-construction and synthetic-training-pair pipelines.

Annotation flow, per query: pool candidates from dense + lexical + gold
neighbors, let the judge drop clearly irrelevant paragraphs (uncertain ones
stay in: human review is the backstop), rerank the survivors, hand the top
seven to a reviewer. Queries whose candidate set empties out are dropped
and logged.

Synthetic-pair flow, per paragraph: exclude annotated retrieval targets
(leakage), drop procedural content (tables of contents, captions), generate
a query, score the pair with the reranker, and keep it only above the
threshold. Every input paragraph yields exactly one record, so the drop
accounting is exhaustive.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Paragraph
from .errors import RemoteError, ValidationError
from .llmgateway import (
    CONTENT_FILTER_SYSTEM_PROMPT,
    LABEL_IRRELEVANT,
    PromptRequest,
    ROLE_CONTENT_FILTER,
    generate_synthetic_query,
    judge_relevance,
)
from .retrieval import PipelineConfig, SearchStores, pool_candidates, rerank_candidates

logger = logging.getLogger(__name__)

DROP_REASONS = (
    "none",
    "model_declined",
    "below_threshold",
    "content_type",
    "is_gold_target",
    "error",
)


@dataclass
class CurationConfig:
    reranker_threshold: float = 0.5
    content_filter_on: bool = True
    exclude_gold_targets: bool = True
    max_candidates_for_review: int = 7

    def __post_init__(self):
        if not 0.0 <= self.reranker_threshold <= 1.0:
            raise ValidationError("reranker_threshold must be in [0, 1]")
        if self.max_candidates_for_review < 1:
            raise ValidationError("max_candidates_for_review must be >= 1")


@dataclass
class AnnotationCandidate:
    paragraph_id: str
    text: str
    reranker_score: float
    judge_label: str


@dataclass
class AnnotationTask:
    query_id: str
    query_text: str
    candidates: list[AnnotationCandidate]  # score-descending, length capped
    context: dict | None = None  # prior gold ids / prior freeform feedback
    degraded: bool = False


@dataclass
class SyntheticPair:
    query_text: str | None
    paragraph_id: str
    generator_tag: str
    reranker_score: float | None
    kept: bool
    drop_reason: str
    error: str | None = None

    def __post_init__(self):
        if self.drop_reason not in DROP_REASONS:
            raise ValidationError(f"unknown drop_reason {self.drop_reason!r}")
        if self.kept != (self.drop_reason == "none"):
            raise ValidationError("kept must be true exactly when drop_reason is none")


# ---------------------------------------------------------------------------
# Content-type filter
# ---------------------------------------------------------------------------

_DOT_LEADER_RE = re.compile(r"\.{4,}\s*\d+\s*$")
_PAGE_NUMBER_LINE_RE = re.compile(r"\d+\s*$")
_PROCEDURAL_RE = re.compile(
    r"^\s*(TABLE OF CONTENTS|TABLE OF AUTHORITIES|CERTIFICATION OF SERVICE|"
    r"PROOF OF SERVICE|NOTICE OF APPEAL|SUPERIOR COURT OF|DOCKET NO|INDICTMENT NO)",
    re.MULTILINE,
)


@dataclass(frozen=True)
class ContentDecision:
    keep: bool
    degraded: bool = False


def _heuristic_content_keep(text: str) -> bool:
    if _PROCEDURAL_RE.search(text.upper()):
        return False
    lines = [ln.rstrip() for ln in text.splitlines() if ln.strip()]
    if any(_DOT_LEADER_RE.search(ln) for ln in lines):
        return False
    if len(lines) >= 2:
        page_endings = sum(1 for ln in lines if _PAGE_NUMBER_LINE_RE.search(ln))
        if page_endings / len(lines) >= 0.6:
            return False
    return True


def filter_content_type(paragraph_text: str, gateway=None,
                        mode: str = "heuristic") -> ContentDecision:
    """keep/drop decision for procedural content (TOCs, captions, boilerplate).

    Heuristic mode is deterministic; llm mode asks the gateway and falls
    back to the heuristic (flagged degraded) when the gateway fails.
    """
    if not paragraph_text.strip():
        raise ValidationError("paragraph_text must be non-empty")
    if mode == "heuristic":
        return ContentDecision(keep=_heuristic_content_keep(paragraph_text))
    if mode != "llm":
        raise ValidationError(f"unknown content filter mode {mode!r}")
    request = PromptRequest(
        system_prompt=CONTENT_FILTER_SYSTEM_PROMPT,
        user_prompt=paragraph_text,
        max_output_chars=50,
    )
    try:
        reply = gateway.complete_role(ROLE_CONTENT_FILTER, request)
    except RemoteError:
        return ContentDecision(keep=_heuristic_content_keep(paragraph_text), degraded=True)
    return ContentDecision(keep=not reply.strip().upper().startswith("PROCEDURAL"))


# ---------------------------------------------------------------------------
# Annotation-task construction
# ---------------------------------------------------------------------------


@dataclass
class DropLogEntry:
    query_id: str
    reason: str
    detail: str = ""


def build_annotation_tasks(queries, stores: SearchStores, gateway, reranker,
                           config: CurationConfig | None = None,
                           pipeline_config: PipelineConfig | None = None,
                           prior_feedback: dict[str, str] | None = None
                           ) -> tuple[list[AnnotationTask], list[DropLogEntry]]:
    """Pool, judge-filter, rerank, and cap candidates for human review.

    Judge verdicts: irrelevant drops the candidate; relevant and uncertain
    stay. A judge or reranker hard failure emits the task unfiltered with
    the degraded flag instead of losing the query.
    """
    config = config or CurationConfig()
    tasks: list[AnnotationTask] = []
    drop_log: list[DropLogEntry] = []
    for q in queries:
        pool = pool_candidates(q.text, set(q.gold_ids), stores,
                               config=pipeline_config, query_id=q.query_id)
        degraded = False
        survivors: list[tuple[str, str]] = []  # (paragraph_id, judge_label)
        for pid in sorted(pool.candidates):
            verdict = judge_relevance(gateway, q.text, stores.paragraphs.get(pid).text)
            if verdict.transport_error:
                degraded = True
            if verdict.label == LABEL_IRRELEVANT:
                continue
            survivors.append((pid, verdict.label))
        if not survivors:
            drop_log.append(DropLogEntry(query_id=q.query_id,
                                         reason="all_candidates_judged_irrelevant"))
            logger.info("query %s dropped: judge rejected every candidate", q.query_id)
            continue

        texts = [stores.paragraphs.get(pid).text for pid, _ in survivors]
        outcome = rerank_candidates(q.text, texts, reranker)
        if outcome.degraded:
            degraded = True
            scored = [(pid, label, 0.0) for pid, label in survivors]
        else:
            scored = [
                (pid, label, score)
                for (pid, label), score in zip(survivors, outcome.scores)
            ]
        scored.sort(key=lambda t: (-t[2], t[0]))
        top = scored[: config.max_candidates_for_review]
        context = {"prior_gold_ids": sorted(q.gold_ids)}
        if prior_feedback and q.query_id in prior_feedback:
            context["prior_feedback"] = prior_feedback[q.query_id]
        tasks.append(
            AnnotationTask(
                query_id=q.query_id,
                query_text=q.text,
                candidates=[
                    AnnotationCandidate(
                        paragraph_id=pid,
                        text=stores.paragraphs.get(pid).text,
                        reranker_score=score,
                        judge_label=label,
                    )
                    for pid, label, score in top
                ],
                context=context,
                degraded=degraded,
            )
        )
    return tasks, drop_log


def write_annotation_tasks(tasks: list[AnnotationTask], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in tasks:
            f.write(json.dumps({
                "query_id": t.query_id,
                "query_text": t.query_text,
                "candidates": [
                    {
                        "paragraph_id": c.paragraph_id,
                        "text": c.text,
                        "reranker_score": c.reranker_score,
                        "judge_label": c.judge_label,
                    }
                    for c in t.candidates
                ],
                "context": t.context,
                "degraded": t.degraded,
            }, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Synthetic training pairs
# ---------------------------------------------------------------------------


def generate_synthetic_dataset(paragraphs: list[Paragraph], gateway, reranker,
                               config: CurationConfig | None = None,
                               gold_target_ids: set[str] | None = None,
                               fewshot_examples: list[tuple[str, str]] | None = None,
                               generator_tag: str = "default"
                               ) -> list[SyntheticPair]:
    """One SyntheticPair per input paragraph, with full drop accounting.

    Order of filters: gold-target exclusion, content-type filter, query
    generation (the model may decline), reranker threshold. Per-item
    failures never abort the run; they land in drop_reason/error.
    """
    config = config or CurationConfig()
    gold_target_ids = gold_target_ids or set()
    pairs: list[SyntheticPair] = []
    for p in sorted(paragraphs, key=lambda p: p.paragraph_id):
        if config.exclude_gold_targets and p.paragraph_id in gold_target_ids:
            pairs.append(SyntheticPair(None, p.paragraph_id, generator_tag,
                                       None, False, "is_gold_target"))
            continue
        if config.content_filter_on:
            decision = filter_content_type(p.text)
            if not decision.keep:
                pairs.append(SyntheticPair(None, p.paragraph_id, generator_tag,
                                           None, False, "content_type"))
                continue
        generated = generate_synthetic_query(gateway, p.text, fewshot_examples)
        if generated.error is not None:
            pairs.append(SyntheticPair(None, p.paragraph_id, generator_tag,
                                       None, False, "error", error=generated.error))
            continue
        if generated.declined:
            pairs.append(SyntheticPair(None, p.paragraph_id, generator_tag,
                                       None, False, "model_declined"))
            continue
        outcome = rerank_candidates(generated.text, [p.text], reranker)
        if outcome.degraded:
            pairs.append(SyntheticPair(generated.text, p.paragraph_id, generator_tag,
                                       None, False, "error",
                                       error="reranker unavailable"))
            continue
        score = outcome.scores[0]
        if score < config.reranker_threshold:
            pairs.append(SyntheticPair(generated.text, p.paragraph_id, generator_tag,
                                       score, False, "below_threshold"))
        else:
            pairs.append(SyntheticPair(generated.text, p.paragraph_id, generator_tag,
                                       score, True, "none"))
    return pairs


def drop_accounting(pairs: list[SyntheticPair]) -> dict[str, int]:
    """Counts per drop reason; "none" counts the kept pairs."""
    counts = {reason: 0 for reason in DROP_REASONS}
    for p in pairs:
        counts[p.drop_reason] += 1
    return counts


def export_training_pairs(pairs: list[SyntheticPair], paragraphs: list[Paragraph],
                          path: str | Path) -> int:
    """Write kept pairs as JSONL, ordered by paragraph_id; returns the count."""
    by_id = {p.paragraph_id: p for p in paragraphs}
    kept = sorted((p for p in pairs if p.kept), key=lambda p: p.paragraph_id)
    if not kept:
        logger.warning("no kept pairs; writing an empty training file to %s", path)
    with open(path, "w", encoding="utf-8") as f:
        for pair in kept:
            f.write(json.dumps({
                "query": pair.query_text,
                "positive_paragraph_id": pair.paragraph_id,
                "positive_text": by_id[pair.paragraph_id].text,
            }, ensure_ascii=False) + "\n")
    return len(kept)


def write_drop_log(pairs: list[SyntheticPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            if p.kept:
                continue
            f.write(json.dumps({
                "paragraph_id": p.paragraph_id,
                "drop_reason": p.drop_reason,
                "reranker_score": p.reranker_score,
                "error": p.error,
            }, ensure_ascii=False) + "\n")
