"""Independent brute-force oracles.

Each function here re-implements a definition from scratch, sharing no code
with the package under test: BM25 evaluated term by term, similarity by
exhaustive scan, metrics straight from their definitions, Spearman via
scipy, and feedback-log replay as a plain fold. The tests compare package
output against these.
"""

from __future__ import annotations

import json
import math

import numpy as np
from scipy import stats


def bm25_reference(query_tokens, doc_tokens_by_id, k1=1.2, b=0.75):
    """Direct evaluation of the Okapi formula for every document."""
    n = len(doc_tokens_by_id)
    lengths = {pid: len(toks) for pid, toks in doc_tokens_by_id.items()}
    avg_len = sum(lengths.values()) / n
    scores = {}
    for pid, toks in doc_tokens_by_id.items():
        score = 0.0
        for term in query_tokens:
            tf = toks.count(term)
            if tf == 0:
                continue
            df = sum(1 for other in doc_tokens_by_id.values() if term in other)
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            denom = tf + k1 * (1.0 - b + b * lengths[pid] / avg_len)
            score += idf * tf / denom
        if score > 0.0:
            scores[pid] = score
    return scores


def topk_by_score(scores, k):
    """(id, score) pairs sorted score-desc then id-asc, truncated to k."""
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


def cosine_scan_reference(vectors_by_id, query_vec, k):
    """Exhaustive cosine over every entry (explicit norms, no shortcuts)."""
    q = np.asarray(query_vec, dtype=np.float64)
    qn = np.linalg.norm(q)
    scores = {}
    for pid, vec in vectors_by_id.items():
        v = np.asarray(vec, dtype=np.float64)
        scores[pid] = float(v @ q / (np.linalg.norm(v) * qn))
    return topk_by_score(scores, k)


def recall_reference(ranked_ids, gold_ids, k):
    found = 0
    for gid in gold_ids:
        if gid in ranked_ids[:k]:
            found += 1
    return found / len(gold_ids)


def ndcg_reference(ranked_ids, gold_ids, k):
    gains = [1.0 if pid in gold_ids else 0.0 for pid in ranked_ids[:k]]
    dcg = sum(g / math.log2(rank + 1) for rank, g in enumerate(gains, start=1))
    ideal = [1.0] * min(k, len(gold_ids))
    idcg = sum(g / math.log2(rank + 1) for rank, g in enumerate(ideal, start=1))
    return dcg / idcg if idcg else 0.0


def mrr_reference(ranked_ids, gold_ids, k):
    rank = 1
    for pid in ranked_ids:
        if rank > k:
            break
        if pid in gold_ids:
            return 1.0 / rank
        rank += 1
    return 0.0


def map_reference(ranked_ids, gold_ids, k):
    precisions = []
    seen_relevant = 0
    for rank, pid in enumerate(ranked_ids[:k], start=1):
        if pid in gold_ids:
            seen_relevant += 1
            precisions.append(seen_relevant / rank)
    return sum(precisions) / len(gold_ids)


def spearman_reference(xs, ys):
    rho, _p = stats.spearmanr(xs, ys)
    return float(rho)


def replay_feedback_reference(jsonl_text):
    """Latest-wins fold over raw feedback-log lines: (qid, pid) -> label."""
    latest = {}
    for line in jsonl_text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        for j in rec["judgments"]:
            latest[(rec["query_id"], j["paragraph_id"])] = j["label"]
    return latest
