"""Document ingestion, paragraph segmentation, and the paragraph store.

Source documents arrive as plain text (one record per document); they are
validated, split into paragraphs, deduplicated by content hash, and kept in
an immutable :class:`ParagraphStore` that the search stack reads from.

Segmentation is deterministic by default: split on blank lines and heading
lines, merge fragments below ``min_words``, split oversized blocks at
sentence boundaries. An LLM-assisted mode exists behind the gateway and
falls back to the heuristic when the gateway is unreachable.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from .errors import ValidationError

logger = logging.getLogger(__name__)

DOC_TYPES = ("brief", "directive", "internal")

_WS_RE = re.compile(r"\s+")

# A heading line opens a new block: all-caps argument headings
# ("POINT I", "STATEMENT OF FACTS"), or short numbered captions ("I.", "A.", "1.").
_HEADING_RE = re.compile(
    r"^(?:[A-Z][A-Z0-9 ,.;:()'\"&/-]{3,80}|(?:[IVXLC]+|[A-Z]|\d{1,2})\.)$"
)

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+(?=[A-Z\"'(\[])")


def normalize_text(text: str) -> str:
    """Unicode NFC, collapse runs of whitespace, strip the ends."""
    return _WS_RE.sub(" ", unicodedata.normalize("NFC", text)).strip()


def text_hash(text: str) -> str:
    """Lowercase hex SHA-256 of the normalized text."""
    return hashlib.sha256(normalize_text(text).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    doc_type: str  # one of DOC_TYPES
    filing_date: date | None
    source_path: str
    text: str


@dataclass(frozen=True)
class Paragraph:
    paragraph_id: str
    doc_id: str
    ordinal: int
    text: str
    text_hash: str


@dataclass(frozen=True)
class CorpusStats:
    n_documents: int
    n_paragraphs: int
    n_queries: int | None
    avg_paragraph_len_words: float
    avg_query_len_words: float | None
    type_token_ratio: float


@dataclass
class SegmenterConfig:
    """Controls :func:`segment_document`.

    mode "heuristic" is fully offline and deterministic; "llm_assisted"
    asks the gateway for split points and falls back to the heuristic on
    any gateway failure (the fallback is recorded in ``fallback_doc_ids``).
    """

    mode: str = "heuristic"
    min_words: int = 40
    max_words: int = 400
    gateway: object | None = None
    fallback_doc_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in ("heuristic", "llm_assisted"):
            raise ValidationError(f"unknown segmenter mode: {self.mode!r}")
        if self.min_words < 1 or self.max_words < self.min_words:
            raise ValidationError("need 1 <= min_words <= max_words")


def _parse_filing_date(raw) -> date | None:
    if raw is None or raw == "":
        return None
    if isinstance(raw, date):
        return raw
    return date.fromisoformat(str(raw))


def ingest_documents(records: list[dict]) -> list[Document]:
    """Validate raw document records into Documents.

    Records need ``text`` and ``doc_type``; ``doc_id`` is assigned
    sequentially when absent. Empty text, an unknown doc_type, or a
    duplicate doc_id reject the batch with the offending record named.
    """
    docs: list[Document] = []
    seen: set[str] = set()
    for i, rec in enumerate(records):
        doc_id = str(rec.get("doc_id") or f"doc-{i:05d}")
        text = rec.get("text") or ""
        if not text.strip():
            raise ValidationError(f"record {i} (doc_id={doc_id!r}) has empty text")
        doc_type = rec.get("doc_type")
        if doc_type not in DOC_TYPES:
            raise ValidationError(
                f"record {i} (doc_id={doc_id!r}) has unknown doc_type {doc_type!r}"
            )
        if doc_id in seen:
            raise ValidationError(f"duplicate doc_id {doc_id!r} at record {i}")
        seen.add(doc_id)
        docs.append(
            Document(
                doc_id=doc_id,
                title=str(rec.get("title") or doc_id),
                doc_type=doc_type,
                filing_date=_parse_filing_date(rec.get("filing_date")),
                source_path=str(rec.get("source_path") or ""),
                text=text,
            )
        )
    return docs


def _word_count(text: str) -> int:
    return len(text.split())


def _split_blocks(text: str) -> list[str]:
    """Split on blank lines; a heading line additionally opens its own block."""
    blocks: list[str] = []
    current: list[str] = []
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line:
            if current:
                blocks.append("\n".join(current))
                current = []
            continue
        if _HEADING_RE.match(line) and current:
            blocks.append("\n".join(current))
            current = []
        current.append(raw_line.rstrip())
    if current:
        blocks.append("\n".join(current))
    return blocks


def _merge_short_blocks(blocks: list[str], min_words: int) -> list[str]:
    """Merge each under-length block forward into its successor."""
    merged: list[str] = []
    pending = ""
    for block in blocks:
        candidate = f"{pending}\n{block}" if pending else block
        if _word_count(candidate) < min_words:
            pending = candidate
        else:
            merged.append(candidate)
            pending = ""
    if pending:
        if merged:
            merged[-1] = f"{merged[-1]}\n{pending}"
        else:
            merged.append(pending)
    return merged


def _split_long_block(block: str, max_words: int) -> list[str]:
    """Greedy sentence packing; a single over-length sentence stays whole."""
    if _word_count(block) <= max_words:
        return [block]
    sentences = _SENTENCE_SPLIT_RE.split(block)
    pieces: list[str] = []
    current: list[str] = []
    current_words = 0
    for sent in sentences:
        w = _word_count(sent)
        if current and current_words + w > max_words:
            pieces.append(" ".join(current))
            current = []
            current_words = 0
        current.append(sent)
        current_words += w
    if current:
        pieces.append(" ".join(current))
    return pieces


def _heuristic_segment(text: str, config: SegmenterConfig) -> list[str]:
    blocks = _split_blocks(text)
    if not blocks:
        return []
    blocks = _merge_short_blocks(blocks, config.min_words)
    out: list[str] = []
    for block in blocks:
        out.extend(_split_long_block(block, config.max_words))
    return out


_LLM_SEGMENT_INSTRUCTIONS = (
    "Split the following document into self-contained paragraphs. Copy the "
    "text verbatim and place the marker <<<SPLIT>>> on its own line between "
    "paragraphs. Do not add, drop, or rewrite any text."
)


def _llm_segment(text: str, config: SegmenterConfig) -> list[str] | None:
    """Ask the gateway for split markers; None means fall back."""
    gateway = config.gateway
    if gateway is None:
        return None
    from .errors import RemoteError
    from .llmgateway import PromptRequest  # local import: avoid cycle

    try:
        reply = gateway.complete_role(
            "segmenter",
            PromptRequest(
                system_prompt=_LLM_SEGMENT_INSTRUCTIONS,
                user_prompt=text,
                max_output_chars=max(len(text) * 2, 4000),
            ),
        )
    except RemoteError:
        return None
    pieces = [p.strip() for p in reply.split("<<<SPLIT>>>") if p.strip()]
    if not pieces:
        return None
    return pieces


def segment_document(doc: Document, segmenter: SegmenterConfig | None = None) -> list[Paragraph]:
    """Split a document into ordered paragraphs (never zero for non-empty text).

    Heuristic mode is deterministic and drops no non-whitespace span.
    """
    config = segmenter or SegmenterConfig()
    if not doc.text.strip():
        raise ValidationError(f"document {doc.doc_id!r} has empty text")

    pieces: list[str] | None = None
    if config.mode == "llm_assisted":
        pieces = _llm_segment(doc.text, config)
        if pieces is None:
            config.fallback_doc_ids.append(doc.doc_id)
            logger.warning(
                "llm_assisted segmentation unavailable for %s; using heuristic",
                doc.doc_id,
            )
    if pieces is None:
        pieces = _heuristic_segment(doc.text, config)
    if not pieces:
        pieces = [doc.text]

    return [
        Paragraph(
            paragraph_id=f"{doc.doc_id}-p{ordinal:04d}",
            doc_id=doc.doc_id,
            ordinal=ordinal,
            text=piece,
            text_hash=text_hash(piece),
        )
        for ordinal, piece in enumerate(pieces)
    ]


def deduplicate(paragraphs: list[Paragraph]) -> tuple[list[Paragraph], dict[str, str]]:
    """Keep one paragraph per text_hash (lowest (doc_id, ordinal) wins).

    Returns the survivors in input order plus a dropped_id -> kept_id map.
    Idempotent.
    """
    keeper: dict[str, Paragraph] = {}
    for p in paragraphs:
        cur = keeper.get(p.text_hash)
        if cur is None or (p.doc_id, p.ordinal) < (cur.doc_id, cur.ordinal):
            keeper[p.text_hash] = p
    kept_ids = {p.paragraph_id for p in keeper.values()}
    survivors = [p for p in paragraphs if p.paragraph_id in kept_ids]
    mapping = {
        p.paragraph_id: keeper[p.text_hash].paragraph_id
        for p in paragraphs
        if p.paragraph_id not in kept_ids
    }
    return survivors, mapping


class ParagraphStore:
    """Immutable-after-build collection of paragraphs plus document metadata.

    Built single-writer; safe for unlimited concurrent readers afterwards.
    """

    def __init__(self, paragraphs: list[Paragraph], documents: list[Document] | None = None):
        if not paragraphs:
            raise ValidationError("paragraph store may not be empty")
        self.paragraphs = list(paragraphs)
        self.by_id = {p.paragraph_id: p for p in self.paragraphs}
        if len(self.by_id) != len(self.paragraphs):
            raise ValidationError("duplicate paragraph_id in store")
        self.documents = {d.doc_id: d for d in (documents or [])}

    def __len__(self) -> int:
        return len(self.paragraphs)

    def __contains__(self, paragraph_id: str) -> bool:
        return paragraph_id in self.by_id

    def get(self, paragraph_id: str) -> Paragraph:
        return self.by_id[paragraph_id]

    def document_for(self, paragraph_id: str) -> Document | None:
        return self.documents.get(self.by_id[paragraph_id].doc_id)


def corpus_stats(store: ParagraphStore, queries: list[str] | None = None) -> CorpusStats:
    """Counts, average lengths, and type-token ratio over the store.

    A word is a whitespace-delimited token after lowercasing.
    """
    if len(store) == 0:
        raise ValidationError("empty store")
    n_tokens = 0
    vocab: set[str] = set()
    for p in store.paragraphs:
        tokens = p.text.lower().split()
        n_tokens += len(tokens)
        vocab.update(tokens)
    doc_ids = {p.doc_id for p in store.paragraphs}
    n_docs = len(store.documents) if store.documents else len(doc_ids)
    avg_q = None
    if queries:
        avg_q = sum(len(q.split()) for q in queries) / len(queries)
    return CorpusStats(
        n_documents=n_docs,
        n_paragraphs=len(store),
        n_queries=len(queries) if queries is not None else None,
        avg_paragraph_len_words=n_tokens / len(store),
        avg_query_len_words=avg_q,
        type_token_ratio=len(vocab) / n_tokens if n_tokens else 0.0,
    )


# ---------------------------------------------------------------------------
# JSONL interchange
# ---------------------------------------------------------------------------


def write_documents_jsonl(docs: list[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for d in docs:
            f.write(
                json.dumps(
                    {
                        "doc_id": d.doc_id,
                        "title": d.title,
                        "doc_type": d.doc_type,
                        "filing_date": d.filing_date.isoformat() if d.filing_date else None,
                        "source_path": d.source_path,
                        "text": d.text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_documents_jsonl(path: str | Path) -> list[Document]:
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: bad JSON ({exc})") from exc
    return ingest_documents(records)


def write_paragraphs_jsonl(paragraphs: list[Paragraph], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in paragraphs:
            f.write(
                json.dumps(
                    {
                        "paragraph_id": p.paragraph_id,
                        "doc_id": p.doc_id,
                        "ordinal": p.ordinal,
                        "text": p.text,
                        "text_hash": p.text_hash,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_paragraphs_jsonl(path: str | Path) -> list[Paragraph]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(
                    Paragraph(
                        paragraph_id=rec["paragraph_id"],
                        doc_id=rec["doc_id"],
                        ordinal=int(rec["ordinal"]),
                        text=rec["text"],
                        text_hash=rec["text_hash"],
                    )
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad paragraph record ({exc})") from exc
    return out
