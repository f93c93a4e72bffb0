"""Dataset loading, retrieval metrics, rank correlation, and report emission.

Metric conventions: binary relevance, macro-averaged over queries that have
at least one gold paragraph (queries with empty gold are excluded from
aggregates and counted separately). The reported bundle is recall@1,
recall@5, NDCG@5, MRR@10, and MAP@100.

File formats:
  queries.jsonl   {query_id, text, intent_tag?, strategy_tag?, gold_paragraph_ids: [...]}
  qrels.tsv       query_id <TAB> paragraph_id <TAB> label(1|0)
  run file        query_id <TAB> paragraph_id <TAB> rank <TAB> score <TAB> run_tag
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Paragraph, read_paragraphs_jsonl
from .errors import DatasetError, ValidationError

INTENT_TAGS = (
    "standard_rule_doctrine",
    "topical_search",
    "legal_argument",
    "term_clarification",
    "definition",
    "exception",
    "factual_answer",
    "good_law",
)

STRATEGY_TAGS = ("embedding", "keyword", "agentic")

REPORT_METRICS = ("recall@1", "recall@5", "ndcg@5", "mrr@10", "map@100")


@dataclass
class Query:
    query_id: str
    text: str
    gold_ids: set[str] = field(default_factory=set)
    intent_tag: str | None = None
    strategy_tag: str | None = None
    contains_pii: bool = False

    def __post_init__(self):
        if not self.text.strip():
            raise ValidationError(f"query {self.query_id!r} has empty text")
        if self.intent_tag is not None and self.intent_tag not in INTENT_TAGS:
            raise ValidationError(f"unknown intent_tag {self.intent_tag!r}")
        if self.strategy_tag is not None and self.strategy_tag not in STRATEGY_TAGS:
            raise ValidationError(f"unknown strategy_tag {self.strategy_tag!r}")


class JudgmentSet:
    """Binary labels keyed by (query_id, paragraph_id); duplicate pairs rejected."""

    def __init__(self):
        self.labels: dict[tuple[str, str], str] = {}

    def __len__(self) -> int:
        return len(self.labels)

    def add(self, query_id: str, paragraph_id: str, label: str) -> None:
        if label not in ("relevant", "irrelevant"):
            raise ValidationError(f"label must be relevant/irrelevant, got {label!r}")
        key = (query_id, paragraph_id)
        if key in self.labels:
            raise ValidationError(f"duplicate judgment for {key}")
        self.labels[key] = label

    def relevant_ids(self, query_id: str) -> set[str]:
        return {
            pid for (qid, pid), lab in self.labels.items()
            if qid == query_id and lab == "relevant"
        }

    def to_qrels_tsv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for (qid, pid), lab in sorted(self.labels.items()):
                f.write(f"{qid}\t{pid}\t{1 if lab == 'relevant' else 0}\n")

    @classmethod
    def from_qrels_tsv(cls, path: str | Path) -> "JudgmentSet":
        js = cls()
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3 or parts[2] not in ("0", "1"):
                    raise DatasetError(f"{path}:{lineno}: malformed qrels line")
                js.add(parts[0], parts[1], "relevant" if parts[2] == "1" else "irrelevant")
        return js


@dataclass(frozen=True)
class RunEntry:
    query_id: str
    paragraph_id: str
    rank: int
    score: float
    run_tag: str


def write_run_file(entries: list[RunEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for e in entries:
            f.write(f"{e.query_id}\t{e.paragraph_id}\t{e.rank}\t{e.score}\t{e.run_tag}\n")


def load_run_file(path: str | Path) -> dict[str, list[RunEntry]]:
    """Parse and validate a run: per query, ranks 1..n unique and scores
    non-increasing with rank. Inconsistent files are rejected, not reordered."""
    per_query: dict[str, list[RunEntry]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 5:
                raise DatasetError(f"{path}:{lineno}: expected 5 tab-separated fields")
            try:
                entry = RunEntry(parts[0], parts[1], int(parts[2]), float(parts[3]), parts[4])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            per_query.setdefault(entry.query_id, []).append(entry)
    for qid, entries in per_query.items():
        entries.sort(key=lambda e: e.rank)
        ranks = [e.rank for e in entries]
        if ranks != list(range(1, len(entries) + 1)):
            raise DatasetError(f"run for query {qid!r}: ranks are not 1..n consecutive")
        for a, b in zip(entries, entries[1:]):
            if b.score > a.score:
                raise DatasetError(
                    f"run for query {qid!r}: score increases from rank {a.rank} to {b.rank}"
                )
    return per_query


def load_dataset(queries_path: str | Path, paragraphs_path: str | Path,
                 qrels_path: str | Path | None = None
                 ) -> tuple[list[Query], list[Paragraph], JudgmentSet]:
    """Load and cross-validate a dataset; every gold id must resolve."""
    paragraphs = read_paragraphs_jsonl(paragraphs_path)
    para_ids = {p.paragraph_id for p in paragraphs}

    queries: list[Query] = []
    with open(queries_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                queries.append(
                    Query(
                        query_id=str(rec["query_id"]),
                        text=rec["text"],
                        gold_ids=set(rec.get("gold_paragraph_ids", [])),
                        intent_tag=rec.get("intent_tag"),
                        strategy_tag=rec.get("strategy_tag"),
                        contains_pii=bool(rec.get("contains_pii", False)),
                    )
                )
            except (json.JSONDecodeError, KeyError, ValidationError) as exc:
                raise DatasetError(f"{queries_path}:{lineno}: {exc}") from exc
    if not queries:
        raise DatasetError(f"{queries_path}: no queries")

    dangling = sorted(
        {gid for q in queries for gid in q.gold_ids if gid not in para_ids}
    )
    if dangling:
        raise DatasetError(f"gold paragraph ids not in corpus: {dangling}")

    judgments = JudgmentSet()
    if qrels_path is not None:
        judgments = JudgmentSet.from_qrels_tsv(qrels_path)
        qids = {q.query_id for q in queries}
        missing_q = sorted({qid for (qid, _pid) in judgments.labels if qid not in qids})
        if missing_q:
            raise DatasetError(f"qrels reference unknown query ids: {missing_q}")
        missing_p = sorted({pid for (_qid, pid) in judgments.labels if pid not in para_ids})
        if missing_p:
            raise DatasetError(f"qrels reference unknown paragraph ids: {missing_p}")
    return queries, paragraphs, judgments


# ---------------------------------------------------------------------------
# Per-query metrics (binary gains; inputs are ids in rank order)
# ---------------------------------------------------------------------------


def _check_gold(gold_ids: set[str], k: int) -> None:
    if not gold_ids:
        raise ValidationError("gold_ids must be non-empty; exclude this query from eval")
    if k < 1:
        raise ValidationError("k must be >= 1")


def recall_at_k(ranked_ids: list[str], gold_ids: set[str], k: int) -> float:
    """|top-k intersect gold| / |gold|."""
    _check_gold(gold_ids, k)
    return len(set(ranked_ids[:k]) & gold_ids) / len(gold_ids)


def ndcg_at_k(ranked_ids: list[str], gold_ids: set[str], k: int) -> float:
    """Binary-gain NDCG: DCG = sum 1/log2(i+1) over relevant ranks i <= k,
    ideal DCG places min(k, |gold|) relevant items first."""
    _check_gold(gold_ids, k)
    dcg = sum(
        1.0 / math.log2(i + 1)
        for i, pid in enumerate(ranked_ids[:k], start=1)
        if pid in gold_ids
    )
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, min(k, len(gold_ids)) + 1))
    return dcg / idcg


def mrr_at_k(ranked_ids: list[str], gold_ids: set[str], k: int = 10) -> float:
    """1/rank of the first relevant result within k, else 0."""
    _check_gold(gold_ids, k)
    for i, pid in enumerate(ranked_ids[:k], start=1):
        if pid in gold_ids:
            return 1.0 / i
    return 0.0


def map_at_k(ranked_ids: list[str], gold_ids: set[str], k: int = 100) -> float:
    """(1/|gold|) * sum of precision-at-r over relevant ranks r <= k."""
    _check_gold(gold_ids, k)
    hits = 0
    total = 0.0
    for i, pid in enumerate(ranked_ids[:k], start=1):
        if pid in gold_ids:
            hits += 1
            total += hits / i
    return total / len(gold_ids)


def per_query_metrics(ranked_ids: list[str], gold_ids: set[str]) -> dict[str, float]:
    return {
        "recall@1": recall_at_k(ranked_ids, gold_ids, 1),
        "recall@5": recall_at_k(ranked_ids, gold_ids, 5),
        "ndcg@5": ndcg_at_k(ranked_ids, gold_ids, 5),
        "mrr@10": mrr_at_k(ranked_ids, gold_ids, 10),
        "map@100": map_at_k(ranked_ids, gold_ids, 100),
    }


@dataclass
class MetricsReport:
    run_tag: str
    dataset_tag: str
    per_query: dict[str, dict[str, float]]
    aggregates: dict[str, float]
    n_queries: int
    n_excluded_empty_gold: int = 0
    breakdowns: dict | None = None

    def to_dict(self) -> dict:
        return {
            "run_tag": self.run_tag,
            "dataset_tag": self.dataset_tag,
            "per_query": self.per_query,
            "aggregates": self.aggregates,
            "n_queries": self.n_queries,
            "n_excluded_empty_gold": self.n_excluded_empty_gold,
            "breakdowns": self.breakdowns,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**d)


def evaluate_run(run: dict[str, list], queries: list[Query], run_tag: str = "run",
                 dataset_tag: str = "dataset") -> MetricsReport:
    """Macro-averaged metrics for a run against the queries' gold ids.

    ``run`` maps query_id to ids in rank order (RunEntry lists also accepted).
    Queries with empty gold are excluded from aggregates and counted.
    """
    per_query: dict[str, dict[str, float]] = {}
    n_excluded = 0
    for q in queries:
        if not q.gold_ids:
            n_excluded += 1
            continue
        entries = run.get(q.query_id, [])
        ids = [e.paragraph_id if isinstance(e, RunEntry) else e for e in entries]
        per_query[q.query_id] = per_query_metrics(ids, q.gold_ids)
    if not per_query:
        raise ValidationError("no evaluable queries (all gold sets empty)")
    aggregates = {
        m: sum(v[m] for v in per_query.values()) / len(per_query) for m in REPORT_METRICS
    }
    return MetricsReport(
        run_tag=run_tag,
        dataset_tag=dataset_tag,
        per_query=per_query,
        aggregates=aggregates,
        n_queries=len(per_query),
        n_excluded_empty_gold=n_excluded,
    )


# ---------------------------------------------------------------------------
# Classification metrics (reranker evaluation)
# ---------------------------------------------------------------------------


def f1_from_precision_recall(precision: float, recall: float) -> float:
    """2PR/(P+R); 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def classification_metrics(predictions: list[int], labels: list[int]) -> dict:
    """Standard binary metrics, positive class = relevant (1), plus the
    majority baseline (the all-positive predictor on the same labels)."""
    if not predictions or len(predictions) != len(labels):
        raise ValidationError("predictions and labels must be equal-length and non-empty")
    if any(v not in (0, 1) for v in predictions) or any(v not in (0, 1) for v in labels):
        raise ValidationError("labels must be binary (0/1)")

    def prf(preds):
        tp = sum(1 for p, y in zip(preds, labels) if p == 1 and y == 1)
        fp = sum(1 for p, y in zip(preds, labels) if p == 1 and y == 0)
        fn = sum(1 for p, y in zip(preds, labels) if p == 0 and y == 1)
        tn = sum(1 for p, y in zip(preds, labels) if p == 0 and y == 0)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        return {
            "precision": precision,
            "recall": recall,
            "f1": f1_from_precision_recall(precision, recall),
            "accuracy": (tp + tn) / len(labels),
        }

    result = prf(predictions)
    result["majority_baseline"] = prf([1] * len(labels))
    return result


# ---------------------------------------------------------------------------
# Rank correlation
# ---------------------------------------------------------------------------


def _average_ranks(values: list[float]) -> np.ndarray:
    """Ranks 1..n with ties sharing their average rank."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def spearman(xs: list[float], ys: list[float]) -> float:
    """Spearman rank correlation with average-rank tie handling."""
    if len(xs) != len(ys):
        raise ValidationError("sequences must have equal length")
    if len(xs) < 3:
        raise ValidationError("need at least 3 pairs")
    rx = _average_ranks(list(xs))
    ry = _average_ranks(list(ys))
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        raise ValidationError("correlation undefined for a constant sequence")
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx * ry).sum() / math.sqrt((rx * rx).sum() * (ry * ry).sum()))


# ---------------------------------------------------------------------------
# Taxonomy breakdowns
# ---------------------------------------------------------------------------


def breakdown_by_tag(per_query: dict[str, dict[str, float]], queries: list[Query],
                     tag_kind: str, judgments: JudgmentSet | None = None) -> list[dict]:
    """Per-category query counts and mean metrics.

    tag_kind is "intent" or "strategy". With judgments supplied, each row
    also reports the fraction of its queries with zero relevant results
    (the unhelpful rate). Categories with zero queries are omitted.
    """
    if tag_kind not in ("intent", "strategy"):
        raise ValidationError("tag_kind must be 'intent' or 'strategy'")
    attr = "intent_tag" if tag_kind == "intent" else "strategy_tag"
    tagged = [q for q in queries if getattr(q, attr) is not None]
    if not tagged:
        raise ValidationError(f"no query carries a {tag_kind} tag")

    rows: list[dict] = []
    categories = INTENT_TAGS if tag_kind == "intent" else STRATEGY_TAGS
    for category in categories:
        members = [q for q in tagged if getattr(q, attr) == category]
        scored = [q for q in members if q.query_id in per_query]
        if not members:
            continue
        row: dict = {"category": category, "n_queries": len(members)}
        for metric in REPORT_METRICS:
            if scored:
                row[f"mean_{metric}"] = sum(
                    per_query[q.query_id][metric] for q in scored
                ) / len(scored)
        if judgments is not None:
            unhelpful = sum(1 for q in members if not judgments.relevant_ids(q.query_id))
            row["unhelpful_rate"] = unhelpful / len(members)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def emit_report(reports, fmt: str, path: str | Path) -> Path:
    """Write one or more reports as json, csv, or markdown.

    json round-trips through MetricsReport.from_dict; csv holds one row per
    query; markdown is a run-by-metric table (one data row per report).
    """
    path = Path(path)
    if isinstance(reports, MetricsReport):
        reports = [reports]
    if fmt == "json":
        payload = [r.to_dict() for r in reports]
        path.write_text(json.dumps(payload[0] if len(payload) == 1 else payload,
                                   indent=2, sort_keys=True))
    elif fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["run_tag", "query_id", *REPORT_METRICS])
            for r in reports:
                for qid in sorted(r.per_query):
                    writer.writerow(
                        [r.run_tag, qid] + [r.per_query[qid][m] for m in REPORT_METRICS]
                    )
    elif fmt == "markdown":
        lines = ["| run | " + " | ".join(REPORT_METRICS) + " |",
                 "|---" * (len(REPORT_METRICS) + 1) + "|"]
        for r in reports:
            cells = " | ".join(f"{r.aggregates[m] * 100:.2f}" for m in REPORT_METRICS)
            lines.append(f"| {r.run_tag} | {cells} |")
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValidationError(f"unknown report format {fmt!r}")
    return path
