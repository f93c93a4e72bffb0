"""Tokenization and an Okapi BM25 inverted index for keyword-style queries.

Court-rule citations like "803(c)(27)" are frequent keyword queries, so the
tokenizer keeps the exact citation string as a token in addition to its
subtokens; an exact citation match then outscores passages that merely share
the digits.

Index scoring: score(q, d) = sum over query terms t of
    IDF(t) * tf / (tf + k1 * (1 - b + b * len_d / avg_len)),
with IDF(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which is >= 0 even for
terms present in every paragraph (common legal boilerplate).
"""

from __future__ import annotations

import json
import math
import re
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .corpus import Paragraph
from .errors import ValidationError
from .rankings import RankedList, ranked

SNAPSHOT_MAGIC = b"BBLX"
SNAPSHOT_VERSION = 1

# A citation token is a word followed by one or more parenthesized parts:
# "803(c)(27)", "2C:35-7(a)". Subtokens are its word characters.
_CITATION_RE = re.compile(r"\w+(?:[:.\-]\w+)*(?:\(\w+\))+")
_WORD_RE = re.compile(r"\w+")


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    keep_citation_tokens: bool = True
    min_token_len: int = 1

    def __post_init__(self):
        if self.min_token_len < 1:
            raise ValidationError("min_token_len must be >= 1")


def tokenize(text: str, config: TokenizerConfig | None = None) -> list[str]:
    """Deterministic tokenization; empty text gives an empty list."""
    config = config or TokenizerConfig()
    if config.lowercase:
        text = text.lower()
    tokens: list[str] = []
    pos = 0
    for m in _CITATION_RE.finditer(text):
        tokens.extend(_WORD_RE.findall(text[pos:m.start()]))
        if config.keep_citation_tokens:
            tokens.append(m.group(0))
        tokens.extend(_WORD_RE.findall(m.group(0)))
        pos = m.end()
    tokens.extend(_WORD_RE.findall(text[pos:]))
    if config.min_token_len > 1:
        tokens = [t for t in tokens if len(t) >= config.min_token_len]
    return tokens


class LexicalIndex:
    """Inverted index over paragraphs; immutable once built (build-then-swap)."""

    def __init__(self, tokenizer: TokenizerConfig | None = None,
                 bm25_k1: float = 1.2, bm25_b: float = 0.75):
        self.tokenizer = tokenizer or TokenizerConfig()
        self.bm25_k1 = bm25_k1
        self.bm25_b = bm25_b
        self.postings: dict[str, list[tuple[str, int]]] = {}
        self.doc_lengths: dict[str, int] = {}
        self.n_docs = 0
        self.avg_doc_len = 0.0

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))


def build_lexical_index(paragraphs: list[Paragraph],
                        config: TokenizerConfig | None = None,
                        k1: float = 1.2, b: float = 0.75) -> LexicalIndex:
    """Build the index; rebuilding from the same input is identical."""
    if not paragraphs:
        raise ValidationError("cannot build a lexical index from zero paragraphs")
    index = LexicalIndex(tokenizer=config, bm25_k1=k1, bm25_b=b)
    postings: dict[str, dict[str, int]] = {}
    for p in paragraphs:
        tokens = tokenize(p.text, index.tokenizer)
        if p.paragraph_id in index.doc_lengths:
            raise ValidationError(f"duplicate paragraph_id {p.paragraph_id!r}")
        index.doc_lengths[p.paragraph_id] = len(tokens)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, {})[p.paragraph_id] = tf
    index.postings = {
        term: sorted(by_doc.items()) for term, by_doc in sorted(postings.items())
    }
    index.n_docs = len(index.doc_lengths)
    index.avg_doc_len = sum(index.doc_lengths.values()) / index.n_docs
    return index


def bm25_score(index: LexicalIndex, query_tokens: list[str], paragraph_id: str) -> float:
    """Direct per-document evaluation of the scoring formula."""
    length = index.doc_lengths[paragraph_id]
    norm = index.bm25_k1 * (1.0 - index.bm25_b + index.bm25_b * length / index.avg_doc_len)
    score = 0.0
    for term in query_tokens:
        tf = dict(index.postings.get(term, ())).get(paragraph_id, 0)
        if tf:
            score += index.idf(term) * tf / (tf + norm)
    return score


def lexical_search(index: LexicalIndex, query_text: str, k: int) -> RankedList:
    """Top-k paragraphs by BM25 score.

    Order: descending score, ties broken by ascending paragraph_id. Only
    paragraphs with positive score are returned, so the result may be
    shorter than k. A query that tokenizes to nothing yields an empty
    result flagged "empty_query".
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    query_tokens = tokenize(query_text, index.tokenizer)
    if not query_tokens:
        return ranked(query_text, [], source="sparse", flags=["empty_query"])

    scores: dict[str, float] = {}
    for term in query_tokens:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for pid, tf in plist:
            length = index.doc_lengths[pid]
            norm = index.bm25_k1 * (
                1.0 - index.bm25_b + index.bm25_b * length / index.avg_doc_len
            )
            scores[pid] = scores.get(pid, 0.0) + idf * tf / (tf + norm)

    top = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return ranked(query_text, top, source="sparse")


# ---------------------------------------------------------------------------
# Snapshot: magic "BBLX", version u32, params, doc table, postings.
# All integers little-endian; strings are u32 length + utf-8 bytes.
# ---------------------------------------------------------------------------


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        chunk = self.data[self.pos:self.pos + n]
        if len(chunk) != n:
            raise ValidationError("truncated snapshot")
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def save_index_snapshot(index: LexicalIndex, path: str | Path) -> None:
    parts = [SNAPSHOT_MAGIC, struct.pack("<I", SNAPSHOT_VERSION)]
    parts.append(struct.pack("<dd", index.bm25_k1, index.bm25_b))
    parts.append(
        struct.pack(
            "<??I",
            index.tokenizer.lowercase,
            index.tokenizer.keep_citation_tokens,
            index.tokenizer.min_token_len,
        )
    )
    doc_ids = sorted(index.doc_lengths)
    row_of = {pid: i for i, pid in enumerate(doc_ids)}
    parts.append(struct.pack("<I", len(doc_ids)))
    for pid in doc_ids:
        parts.append(_pack_str(pid))
        parts.append(struct.pack("<I", index.doc_lengths[pid]))
    parts.append(struct.pack("<I", len(index.postings)))
    for term in sorted(index.postings):
        plist = index.postings[term]
        parts.append(_pack_str(term))
        parts.append(struct.pack("<I", len(plist)))
        for pid, tf in plist:
            parts.append(struct.pack("<II", row_of[pid], tf))
    Path(path).write_bytes(b"".join(parts))


def load_index_snapshot(path: str | Path) -> LexicalIndex:
    r = _Reader(Path(path).read_bytes())
    if r.take(4) != SNAPSHOT_MAGIC:
        raise ValidationError("not a lexical index snapshot (bad magic)")
    version = r.u32()
    if version != SNAPSHOT_VERSION:
        raise ValidationError(f"unsupported snapshot version {version}")
    k1, b = r.f64(), r.f64()
    lowercase, keep_cit = struct.unpack("<??", r.take(2))
    min_len = r.u32()
    index = LexicalIndex(
        tokenizer=TokenizerConfig(lowercase=lowercase, keep_citation_tokens=keep_cit,
                                  min_token_len=min_len),
        bm25_k1=k1, bm25_b=b,
    )
    n_docs = r.u32()
    doc_ids = []
    for _ in range(n_docs):
        pid = r.string()
        doc_ids.append(pid)
        index.doc_lengths[pid] = r.u32()
    n_terms = r.u32()
    for _ in range(n_terms):
        term = r.string()
        plist = []
        for _ in range(r.u32()):
            row, tf = struct.unpack("<II", r.take(8))
            plist.append((doc_ids[row], tf))
        index.postings[term] = plist
    index.n_docs = n_docs
    index.avg_doc_len = sum(index.doc_lengths.values()) / n_docs if n_docs else 0.0
    return index


def dump_index_jsonl(index: LexicalIndex, path: str | Path) -> None:
    """Human-readable debug dump (one term per line)."""
    with open(path, "w", encoding="utf-8") as f:
        header = {
            "n_docs": index.n_docs,
            "avg_doc_len": index.avg_doc_len,
            "bm25_k1": index.bm25_k1,
            "bm25_b": index.bm25_b,
        }
        f.write(json.dumps(header) + "\n")
        for term in sorted(index.postings):
            f.write(json.dumps({"term": term, "postings": index.postings[term]}) + "\n")
