"""The serving pipeline and the dataset-construction candidate pooling.

Serving runs: expand -> retrieve (dense, optionally + lexical) -> rerank ->
cut to final_k by relevance -> reorder by recency -> summarize. Every
optional stage degrades transparently: with expansion, reranking, and the
lexical leg all off, the response is exactly dense top-k, which is the
original baseline behavior of the system.

Selection is by relevance, presentation is by recency: the final_k cut
happens on scores first, and only those survivors are reordered by filing
date, so an old but highly relevant brief is never pushed out by a recent
mediocre one.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from datetime import date

import requests

from .corpus import ParagraphStore
from .dense import VectorStore, dense_search
from .errors import ContractError, RemoteError, TransportError, ValidationError
from .lexical import LexicalIndex, lexical_search
from .llmgateway import expand_query, summarize_result
from .rankings import RankedEntry, RankedList

DEFAULT_PER_GOLD_NEIGHBORS = 10


@dataclass
class PipelineConfig:
    use_expansion: bool = False
    dense_n: int = 100
    lexical_n: int = 10
    use_rerank: bool = False
    rerank_keep_threshold: float = 0.5
    final_k: int = 5
    recency_sort: bool = True

    def __post_init__(self):
        if self.dense_n < 1:
            raise ValidationError("dense_n must be >= 1")
        if self.lexical_n < 0:
            raise ValidationError("lexical_n must be >= 0")
        if not 0.0 <= self.rerank_keep_threshold <= 1.0:
            raise ValidationError("rerank_keep_threshold must be in [0, 1]")
        if not 1 <= self.final_k <= self.dense_n + self.lexical_n:
            raise ValidationError("need 1 <= final_k <= dense_n + lexical_n")


@dataclass
class SearchStores:
    """Everything the pipeline reads: all immutable after build."""

    paragraphs: ParagraphStore
    vectors: VectorStore
    embedder: object  # needs .embed_query(text)
    lexical: LexicalIndex | None = None


@dataclass(frozen=True)
class Candidate:
    paragraph_id: str
    score: float
    source: str


@dataclass
class CandidatePool:
    query_id: str
    candidates: dict[str, set[str]]  # paragraph_id -> provenance subset

    def __len__(self) -> int:
        return len(self.candidates)


@dataclass
class SearchResult:
    paragraph_id: str
    title: str
    filing_date: date | None
    snippet: str
    summary: str | None
    score: float
    rank: int


@dataclass
class SearchResponse:
    query_id: str
    results: list[SearchResult] = field(default_factory=list)
    pipeline_trace: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict:
        trace = dict(self.pipeline_trace)
        if not include_timings:
            trace.pop("timings", None)
        return {
            "query_id": self.query_id,
            "results": [
                {
                    "paragraph_id": r.paragraph_id,
                    "title": r.title,
                    "filing_date": r.filing_date.isoformat() if r.filing_date else None,
                    "snippet": r.snippet,
                    "summary": r.summary,
                    "score": r.score,
                    "rank": r.rank,
                }
                for r in self.results
            ],
            "pipeline_trace": trace,
        }

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings=include_timings),
                          sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def recency_sort(entries: list, get_date=None) -> list:
    """Newest first, undated entries last, stable among equal dates.

    Pure reordering: never adds, removes, or edits entries.
    """
    if get_date is None:
        get_date = lambda e: e.filing_date
    return sorted(
        entries,
        key=lambda e: (
            get_date(e) is None,
            -get_date(e).toordinal() if get_date(e) is not None else 0,
        ),
    )


# ---------------------------------------------------------------------------
# Reranking
# ---------------------------------------------------------------------------


@dataclass
class RerankOutcome:
    scores: list[float] | None
    degraded: bool = False


class OverlapReranker:
    """Offline stand-in scorer: fraction of query tokens present in the passage."""

    def score(self, query: str, passages: list[str]) -> list[float]:
        q = set(query.lower().split())
        if not q:
            return [0.0] * len(passages)
        return [len(q & set(p.lower().split())) / len(q) for p in passages]


class RemoteReranker:
    """POST /rerank {"query": ..., "passages": [...]} -> {"scores": [...]}."""

    def __init__(self, endpoint_url: str, timeout: float = 30.0,
                 max_retries: int = 2, post=None):
        self.endpoint_url = endpoint_url
        self.timeout = timeout
        self.max_retries = max_retries
        self._post = post or self._requests_post

    @staticmethod
    def _requests_post(url: str, payload: dict, timeout: float) -> dict:
        resp = requests.post(url, json=payload, timeout=timeout)
        if resp.status_code != 200:
            raise TransportError(f"POST {url} -> {resp.status_code}")
        return resp.json()

    def score(self, query: str, passages: list[str]) -> list[float]:
        attempt = 0
        while True:
            try:
                body = self._post(self.endpoint_url,
                                  {"query": query, "passages": passages}, self.timeout)
                break
            except (TransportError, requests.RequestException) as exc:
                attempt += 1
                if attempt > self.max_retries:
                    raise TransportError(
                        f"rerank endpoint failed after {attempt} attempts: {exc}"
                    ) from exc
                time.sleep(min(0.1 * 2 ** (attempt - 1), 2.0))
        scores = body.get("scores")
        if not isinstance(scores, list) or len(scores) != len(passages):
            raise ContractError("rerank endpoint returned a malformed 'scores' list")
        out = [float(s) for s in scores]
        if any(s < 0.0 or s > 1.0 for s in out):
            raise ContractError("rerank scores must lie in [0, 1]")
        return out


def rerank_candidates(query: str, candidates: list[str], reranker) -> RerankOutcome:
    """Score candidate passages against the query, positionally aligned.

    On scorer failure the candidates come back unscored with the degraded
    flag set; the pipeline then proceeds without reranking.
    """
    if not candidates:
        raise ValidationError("candidates must be non-empty")
    try:
        scores = reranker.score(query, candidates)
    except RemoteError:
        return RerankOutcome(scores=None, degraded=True)
    if len(scores) != len(candidates):
        return RerankOutcome(scores=None, degraded=True)
    return RerankOutcome(scores=[float(s) for s in scores])


# ---------------------------------------------------------------------------
# Candidate pooling (dataset construction)
# ---------------------------------------------------------------------------


def pool_candidates(query_text: str, gold_ids: set[str], stores: SearchStores,
                    config: PipelineConfig | None = None,
                    query_id: str | None = None) -> CandidatePool:
    """Union of dense top-N, lexical top-M, and dense neighbors of each gold.

    Every gold paragraph appears in its own pool: under unit-normalized
    embeddings it is its own nearest neighbor at similarity 1.0. A gold id
    missing from the vector store is an error naming the id.
    """
    config = config or PipelineConfig()
    pool: dict[str, set[str]] = {}

    def add(pid: str, provenance: str):
        pool.setdefault(pid, set()).add(provenance)

    qvec = stores.embedder.embed_query(query_text)
    for entry in dense_search(stores.vectors, qvec, config.dense_n).entries:
        add(entry.paragraph_id, "dense")

    if config.lexical_n > 0 and stores.lexical is not None:
        for entry in lexical_search(stores.lexical, query_text, config.lexical_n).entries:
            add(entry.paragraph_id, "sparse")

    for gid in sorted(gold_ids):
        if gid not in stores.vectors:
            raise ValidationError(f"gold paragraph_id {gid!r} not in vector store")
        gvec = stores.vectors.vector(gid)
        for entry in dense_search(stores.vectors, gvec, DEFAULT_PER_GOLD_NEIGHBORS).entries:
            add(entry.paragraph_id, "gold_neighbor")

    return CandidatePool(query_id=query_id or _default_query_id(query_text),
                         candidates=pool)


# ---------------------------------------------------------------------------
# The serving pipeline
# ---------------------------------------------------------------------------


def _default_query_id(query_text: str) -> str:
    return "q-" + hashlib.sha1(query_text.encode("utf-8")).hexdigest()[:12]


def _snippet(text: str, max_chars: int = 240) -> str:
    flat = " ".join(text.split())
    return flat if len(flat) <= max_chars else flat[: max_chars - 1] + "…"


def retrieve(query_text: str, stores: SearchStores, gateway=None, reranker=None,
             config: PipelineConfig | None = None,
             query_id: str | None = None) -> SearchResponse:
    """Run the full pipeline for one query.

    Stage order: (1) optional expansion, augmented text feeds the dense leg
    only, the lexical leg keeps the raw query so exact citation tokens
    survive; (2) dense union lexical, deduplicated by paragraph_id keeping
    the higher-scored provenance; (3) optional rerank with a keep threshold;
    (4) cut to final_k by score; (5) optional recency reorder; (6) attach
    summaries. Exhausting the candidates yields an empty response with an
    explanatory flag, never an exception.
    """
    if not query_text.strip():
        raise ValidationError("query_text must be non-empty")
    config = config or PipelineConfig()
    qid = query_id or _default_query_id(query_text)
    trace: dict = {"flags": [], "expanded": False, "reranked": False, "degraded": False}
    timings: dict[str, float] = {}
    t0 = time.perf_counter()

    # (1) expansion
    dense_text = query_text
    if config.use_expansion and gateway is not None:
        expanded = expand_query(gateway, query_text)
        trace["expanded"] = True
        if expanded.degraded:
            trace["flags"].append("expansion_degraded")
            trace["degraded"] = True
        else:
            dense_text = expanded.augmented
    timings["expand_ms"] = (time.perf_counter() - t0) * 1000.0

    # (2) first-stage retrieval
    t1 = time.perf_counter()
    candidates: dict[str, Candidate] = {}
    qvec = stores.embedder.embed_query(dense_text)
    for entry in dense_search(stores.vectors, qvec, config.dense_n).entries:
        candidates[entry.paragraph_id] = Candidate(entry.paragraph_id, entry.score, "dense")
    if config.lexical_n > 0 and stores.lexical is not None:
        for entry in lexical_search(stores.lexical, query_text, config.lexical_n).entries:
            cur = candidates.get(entry.paragraph_id)
            if cur is None or entry.score > cur.score:
                candidates[entry.paragraph_id] = Candidate(
                    entry.paragraph_id, entry.score, "sparse"
                )
    timings["retrieve_ms"] = (time.perf_counter() - t1) * 1000.0

    # (3) rerank
    t2 = time.perf_counter()
    if config.use_rerank and reranker is not None and candidates:
        ordered = sorted(candidates.values(), key=lambda c: (-c.score, c.paragraph_id))
        texts = [stores.paragraphs.get(c.paragraph_id).text for c in ordered]
        outcome = rerank_candidates(query_text, texts, reranker)
        if outcome.degraded:
            trace["flags"].append("rerank_degraded")
            trace["degraded"] = True
        else:
            trace["reranked"] = True
            candidates = {}
            for cand, score in zip(ordered, outcome.scores):
                if score >= config.rerank_keep_threshold:
                    candidates[cand.paragraph_id] = Candidate(
                        cand.paragraph_id, score, "rerank"
                    )
    timings["rerank_ms"] = (time.perf_counter() - t2) * 1000.0

    # (4) relevance cut
    survivors = sorted(candidates.values(), key=lambda c: (-c.score, c.paragraph_id))
    survivors = survivors[: config.final_k]
    if not survivors:
        trace["flags"].append("no_candidates")
        trace["timings"] = timings
        return SearchResponse(query_id=qid, results=[], pipeline_trace=trace)

    # (5) recency reorder of the survivors only
    results: list[SearchResult] = []
    for cand in survivors:
        doc = stores.paragraphs.document_for(cand.paragraph_id)
        para = stores.paragraphs.get(cand.paragraph_id)
        results.append(
            SearchResult(
                paragraph_id=cand.paragraph_id,
                title=doc.title if doc else para.doc_id,
                filing_date=doc.filing_date if doc else None,
                snippet=_snippet(para.text),
                summary=None,
                score=cand.score,
                rank=0,
            )
        )
    if config.recency_sort:
        results = recency_sort(results)

    # (6) summaries
    t3 = time.perf_counter()
    if gateway is not None:
        for r in results:
            doc = stores.paragraphs.document_for(r.paragraph_id)
            meta = {
                "title": r.title,
                "filing_date": doc.filing_date.isoformat() if doc and doc.filing_date else None,
            }
            summary = summarize_result(gateway, stores.paragraphs.get(r.paragraph_id).text, meta)
            r.summary = summary.text
            if summary.degraded and "summary_degraded" not in trace["flags"]:
                trace["flags"].append("summary_degraded")
                trace["degraded"] = True
    timings["summarize_ms"] = (time.perf_counter() - t3) * 1000.0

    for i, r in enumerate(results):
        r.rank = i + 1
    trace["timings"] = timings
    return SearchResponse(query_id=qid, results=results, pipeline_trace=trace)


def ranked_list_from_response(response: SearchResponse, source: str = "rerank") -> RankedList:
    """Adapter for writing pipeline output as a run (rank order as presented)."""
    entries = [
        RankedEntry(paragraph_id=r.paragraph_id, score=r.score, rank=r.rank, source=source)
        for r in response.results
    ]
    return RankedList(query_id=response.query_id, entries=entries)
