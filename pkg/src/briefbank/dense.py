"""Embedding providers, the vector store, and exact top-k similarity search.

Corpora here stay under ~10^5 paragraphs, so search is an exact scan (one
matrix-vector product); there is no approximate index to confound recall
measurements. Vectors are L2-normalized on the way in, which makes cosine
similarity a plain dot product.

Three provider modes:
  remote_endpoint    POST /embed {"texts": [...]} -> {"vectors": [[...]]}
  precomputed_file   flat little-endian f32 matrix + manifest.json + ids.txt
  deterministic_mock hashed bag-of-words through a seeded random projection,
                     so texts sharing tokens land near each other; fully
                     offline and reproducible.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests

from .corpus import Paragraph
from .errors import ContractError, TransportError, ValidationError
from .rankings import RankedList, ranked

logger = logging.getLogger(__name__)

_NORM_TOL = 1e-6


def l2_normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        out = np.zeros_like(vec)
        out[0] = 1.0
        return out
    return vec / norm


def _default_post(url: str, payload: dict, timeout: float) -> dict:
    resp = requests.post(url, json=payload, timeout=timeout)
    if resp.status_code != 200:
        raise TransportError(f"POST {url} -> {resp.status_code}")
    return resp.json()


class DeterministicMockProvider:
    """Offline embedding provider with plausible similarity structure.

    Each token maps to a fixed pseudo-random unit direction (seeded by the
    token's digest), a text embeds to the normalized sum of its token
    directions, so texts sharing tokens score higher. Identical inputs give
    bit-identical vectors.
    """

    def __init__(self, dims: int = 64, seed: int = 0,
                 query_prefix: str = "", passage_prefix: str = ""):
        if dims <= 0:
            raise ValidationError("dims must be positive")
        self.dims = dims
        self.seed = seed
        self.query_prefix = query_prefix
        self.passage_prefix = passage_prefix
        self.provider_tag = f"mock-d{dims}-s{seed}"
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            digest = hashlib.sha256(f"{self.seed}:{token}".encode("utf-8")).digest()
            rng = np.random.RandomState(int.from_bytes(digest[:4], "little"))
            vec = rng.standard_normal(self.dims).astype(np.float64)
            self._token_cache[token] = vec
        return vec

    def _embed_one(self, text: str) -> np.ndarray:
        tokens = text.lower().split()
        if not tokens:
            acc = np.zeros(self.dims, dtype=np.float64)
        else:
            acc = np.sum([self._token_vector(t) for t in tokens], axis=0)
        return l2_normalize(acc).astype(np.float32)

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        if not texts:
            raise ValidationError("texts must be non-empty")
        return [self._embed_one(t) for t in texts]

    def embed_query(self, text: str) -> np.ndarray:
        return self._embed_one(self.query_prefix + text)

    def embed_passages(self, texts: list[str]) -> list[np.ndarray]:
        return self.embed_texts([self.passage_prefix + t for t in texts])


class RemoteEmbeddingProvider:
    """Client for a remote embedding endpoint, with retry and batching."""

    def __init__(self, endpoint_url: str, dims: int | None = None,
                 batch_size: int = 32, timeout: float = 30.0, max_retries: int = 2,
                 query_prefix: str = "", passage_prefix: str = "",
                 provider_tag: str | None = None, post=None):
        if batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        self.endpoint_url = endpoint_url
        self.dims = dims
        self.batch_size = batch_size
        self.timeout = timeout
        self.max_retries = max_retries
        self.query_prefix = query_prefix
        self.passage_prefix = passage_prefix
        self.provider_tag = provider_tag or f"remote:{endpoint_url}"
        self._post = post or _default_post

    def _call(self, texts: list[str]) -> list[np.ndarray]:
        attempt = 0
        while True:
            try:
                body = self._post(self.endpoint_url, {"texts": texts}, self.timeout)
                break
            except (TransportError, requests.RequestException) as exc:
                attempt += 1
                if attempt > self.max_retries:
                    raise TransportError(
                        f"embedding endpoint failed after {attempt} attempts: {exc}"
                    ) from exc
                time.sleep(min(0.1 * 2 ** (attempt - 1), 2.0))
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ContractError("embedding endpoint returned a malformed 'vectors' list")
        out = []
        for row in vectors:
            vec = np.asarray(row, dtype=np.float32)
            if self.dims is None:
                self.dims = int(vec.shape[0])
            elif vec.shape[0] != self.dims:
                raise ContractError(
                    f"embedding dims mismatch: got {vec.shape[0]}, expected {self.dims}"
                )
            out.append(l2_normalize(vec.astype(np.float64)).astype(np.float32))
        return out

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        if not texts:
            raise ValidationError("texts must be non-empty")
        out: list[np.ndarray] = []
        for i in range(0, len(texts), self.batch_size):
            out.extend(self._call(texts[i:i + self.batch_size]))
        return out

    def embed_query(self, text: str) -> np.ndarray:
        return self.embed_texts([self.query_prefix + text])[0]

    def embed_passages(self, texts: list[str]) -> list[np.ndarray]:
        return self.embed_texts([self.passage_prefix + t for t in texts])


class VectorStore:
    """paragraph_id -> unit vector, all one provider, all one width.

    Immutable after build; concurrent searches are safe.
    """

    def __init__(self, dims: int, provider_tag: str):
        if not provider_tag:
            raise ValidationError("provider_tag must be non-empty")
        self.dims = dims
        self.provider_tag = provider_tag
        self.ids: list[str] = []
        self.matrix = np.zeros((0, dims), dtype=np.float32)
        self._row: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, paragraph_id: str) -> bool:
        return paragraph_id in self._row

    def vector(self, paragraph_id: str) -> np.ndarray:
        try:
            return self.matrix[self._row[paragraph_id]]
        except KeyError:
            raise ValidationError(f"paragraph_id {paragraph_id!r} not in vector store") from None

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str, np.ndarray]], provider_tag: str) -> "VectorStore":
        if not pairs:
            raise ValidationError("cannot build an empty vector store")
        dims = int(pairs[0][1].shape[0])
        store = cls(dims, provider_tag)
        rows = []
        for pid, vec in pairs:
            if vec.shape[0] != dims:
                raise ContractError(f"vector for {pid!r} has dims {vec.shape[0]}, store has {dims}")
            if pid in store._row:
                raise ValidationError(f"duplicate paragraph_id {pid!r}")
            store._row[pid] = len(store.ids)
            store.ids.append(pid)
            rows.append(np.asarray(vec, dtype=np.float32))
        store.matrix = np.vstack(rows)
        return store

    def save(self, directory: str | Path) -> None:
        """Bit-exact persistence: f32 matrix + manifest + row-ordered ids."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "vectors.f32").write_bytes(
            np.ascontiguousarray(self.matrix, dtype="<f4").tobytes()
        )
        (d / "manifest.json").write_text(json.dumps(
            {"dims": self.dims, "count": len(self.ids), "provider_tag": self.provider_tag},
            indent=2,
        ))
        (d / "ids.txt").write_text("".join(pid + "\n" for pid in self.ids))

    @classmethod
    def load(cls, directory: str | Path) -> "VectorStore":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        ids = (d / "ids.txt").read_text().splitlines()
        if len(ids) != manifest["count"]:
            raise ValidationError(
                f"ids.txt has {len(ids)} rows, manifest says {manifest['count']}"
            )
        raw = (d / "vectors.f32").read_bytes()
        matrix = np.frombuffer(raw, dtype="<f4").reshape(manifest["count"], manifest["dims"])
        store = cls(manifest["dims"], manifest["provider_tag"])
        store.ids = ids
        store.matrix = matrix.astype(np.float32)
        store._row = {pid: i for i, pid in enumerate(ids)}
        return store


class PrecomputedFileProvider:
    """Serves vectors for known paragraph ids from a saved VectorStore layout."""

    def __init__(self, directory: str | Path):
        self._store = VectorStore.load(directory)
        self.dims = self._store.dims
        self.provider_tag = self._store.provider_tag

    def vector_for(self, paragraph_id: str) -> np.ndarray:
        if paragraph_id not in self._store:
            raise ValidationError(f"no precomputed vector for paragraph_id {paragraph_id!r}")
        return self._store.vector(paragraph_id)


def build_vector_store(paragraphs: list[Paragraph], provider,
                       checkpoint_dir: str | Path | None = None,
                       batch_size: int = 64) -> VectorStore:
    """Embed every paragraph (assumed deduplicated) into a store.

    A provider failure aborts the build but, when checkpoint_dir is given,
    the finished rows are saved there first and reused on the next attempt.
    """
    if not paragraphs:
        raise ValidationError("no paragraphs to embed")

    if isinstance(provider, PrecomputedFileProvider):
        pairs = [(p.paragraph_id, provider.vector_for(p.paragraph_id)) for p in paragraphs]
        return VectorStore.from_pairs(pairs, provider.provider_tag)

    done: dict[str, np.ndarray] = {}
    if checkpoint_dir is not None and (Path(checkpoint_dir) / "manifest.json").exists():
        partial = VectorStore.load(checkpoint_dir)
        if partial.provider_tag == provider.provider_tag:
            done = {pid: partial.matrix[i] for i, pid in enumerate(partial.ids)}
            logger.info("resuming vector build: %d rows from checkpoint", len(done))

    todo = [p for p in paragraphs if p.paragraph_id not in done]
    embed = getattr(provider, "embed_passages", provider.embed_texts)
    for i in range(0, len(todo), batch_size):
        batch = todo[i:i + batch_size]
        try:
            vectors = embed([p.text for p in batch])
        except Exception:
            if checkpoint_dir is not None and done:
                pairs = sorted(done.items())
                VectorStore.from_pairs(pairs, provider.provider_tag).save(checkpoint_dir)
                logger.warning("vector build aborted; checkpoint of %d rows kept", len(done))
            raise
        for p, vec in zip(batch, vectors):
            done[p.paragraph_id] = vec

    pairs = [(p.paragraph_id, done[p.paragraph_id]) for p in paragraphs]
    return VectorStore.from_pairs(pairs, provider.provider_tag)


def dense_search(store: VectorStore, query_vector: np.ndarray, k: int) -> RankedList:
    """Exact top-k by cosine similarity (dot product on unit vectors).

    Descending score; ties broken by ascending paragraph_id. Results do not
    depend on insertion order.
    """
    if len(store) == 0:
        raise ValidationError("vector store is empty")
    if k < 1:
        raise ValidationError("k must be >= 1")
    q = np.asarray(query_vector, dtype=np.float32)
    if q.shape[0] != store.dims:
        raise ContractError(f"query dims {q.shape[0]} != store dims {store.dims}")
    scores = store.matrix @ q
    order = sorted(range(len(store.ids)), key=lambda i: (-float(scores[i]), store.ids[i]))
    top = [(store.ids[i], float(scores[i])) for i in order[:k]]
    return ranked("", top, source="dense")
