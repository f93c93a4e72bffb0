"""HTTP facade over the retrieval pipeline, plus durable feedback capture.

Endpoints (JSON bodies, UTF-8; errors as {"code": ..., "message": ...}):
  POST /v1/search               {query_text, k?, expand?, rerank?}
  POST /v1/feedback             FeedbackRecord-shaped body
  GET  /v1/judgments/export     ?since=ISO&annotator=...
  GET  /v1/paragraphs/{id}
  GET  /healthz

Feedback is an append-only JSONL log, fsynced before the ack, so every
acked record survives a process kill; exports materialize the log with
latest-label-wins per (query_id, paragraph_id). The service issues the
query_id for every search, which keeps feedback joinable to the exact list
that was served.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .errors import ValidationError
from .evalsuite import JudgmentSet
from .retrieval import PipelineConfig, SearchResponse, SearchStores, retrieve

MAX_K = 50


@dataclass
class FeedbackRecord:
    feedback_id: str
    query_id: str
    query_text: str
    judgments: list[dict]  # {paragraph_id, label in {relevant, irrelevant}}
    comment: str
    annotator: str
    timestamp: str  # UTC ISO-8601

    def to_dict(self) -> dict:
        return {
            "feedback_id": self.feedback_id,
            "query_id": self.query_id,
            "query_text": self.query_text,
            "judgments": self.judgments,
            "comment": self.comment,
            "annotator": self.annotator,
            "timestamp": self.timestamp,
        }


class FeedbackLog:
    """Append-only JSONL log; writes are serialized and fsynced before ack."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append(self, record: FeedbackRecord) -> None:
        line = json.dumps(record.to_dict(), ensure_ascii=False) + "\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line)
                f.flush()
                os.fsync(f.fileno())

    def replay(self) -> list[FeedbackRecord]:
        if not self.path.exists():
            return []
        records = []
        with open(self.path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    d = json.loads(line)
                    records.append(FeedbackRecord(**d))
                except (json.JSONDecodeError, TypeError) as exc:
                    raise ValidationError(f"{self.path}:{lineno}: bad log line ({exc})") from exc
        return records


def materialize_judgments(records: list[FeedbackRecord],
                          since: str | None = None,
                          annotator: str | None = None
                          ) -> tuple[JudgmentSet, list[dict]]:
    """Latest-label-wins fold over the log, in log order; plus the comments."""
    latest: dict[tuple[str, str], str] = {}
    comments: list[dict] = []
    for rec in records:
        if since is not None and rec.timestamp < since:
            continue
        if annotator is not None and rec.annotator != annotator:
            continue
        for j in rec.judgments:
            latest[(rec.query_id, j["paragraph_id"])] = j["label"]
        if rec.comment:
            comments.append({
                "query_id": rec.query_id,
                "comment": rec.comment,
                "annotator": rec.annotator,
                "timestamp": rec.timestamp,
            })
    judgments = JudgmentSet()
    for (qid, pid), label in latest.items():
        judgments.add(qid, pid, label)
    return judgments, comments


class SearchService:
    """Search + feedback over immutable stores; handlers never mutate indexes."""

    def __init__(self, stores: SearchStores, feedback_log_path: str | Path,
                 gateway=None, reranker=None,
                 pipeline: PipelineConfig | None = None,
                 rate_limit_per_sec: float = 0.0):
        self.stores = stores
        self.gateway = gateway
        self.reranker = reranker
        self.pipeline = pipeline or PipelineConfig()
        self.log = FeedbackLog(feedback_log_path)
        self.rate_limit_per_sec = rate_limit_per_sec
        self._request_times: list[float] = []
        self._sessions: dict[str, dict] = {}  # query_id -> {query_text, paragraph_ids}

    def _check_rate(self) -> bool:
        if self.rate_limit_per_sec <= 0:
            return True
        now = time.monotonic()
        self._request_times = [t for t in self._request_times if now - t < 1.0]
        if len(self._request_times) >= self.rate_limit_per_sec:
            return False
        self._request_times.append(now)
        return True

    def handle_search(self, query_text: str, k: int | None = None,
                      expand: bool | None = None,
                      rerank: bool | None = None) -> SearchResponse:
        if not query_text or not query_text.strip():
            raise ValidationError("query_text must be non-empty")
        cfg = self.pipeline
        final_k = cfg.final_k if k is None else int(k)
        if not 1 <= final_k <= MAX_K:
            raise ValidationError(f"k must be between 1 and {MAX_K}")
        config = PipelineConfig(
            use_expansion=cfg.use_expansion if expand is None else bool(expand),
            dense_n=cfg.dense_n,
            lexical_n=cfg.lexical_n,
            use_rerank=cfg.use_rerank if rerank is None else bool(rerank),
            rerank_keep_threshold=cfg.rerank_keep_threshold,
            final_k=final_k,
            recency_sort=cfg.recency_sort,
        )
        query_id = "q-" + uuid.uuid4().hex[:16]
        response = retrieve(query_text, self.stores, gateway=self.gateway,
                            reranker=self.reranker, config=config, query_id=query_id)
        self._sessions[query_id] = {
            "query_text": query_text,
            "paragraph_ids": {r.paragraph_id for r in response.results},
        }
        return response

    def record_feedback(self, query_id: str, judgments: list[dict],
                        comment: str = "", annotator: str = "anonymous") -> str:
        """Validate against the served list, append durably, return feedback_id."""
        session = self._sessions.get(query_id)
        if session is None:
            raise ValidationError(f"unknown query_id {query_id!r}")
        if not judgments and not comment.strip():
            raise ValidationError("judgments may be empty only with a non-empty comment")
        for j in judgments:
            pid = j.get("paragraph_id")
            label = j.get("label")
            if label not in ("relevant", "irrelevant"):
                raise ValidationError(f"bad label {label!r} for paragraph {pid!r}")
            if pid not in session["paragraph_ids"]:
                raise ValidationError(
                    f"paragraph {pid!r} was not served for query_id {query_id!r}"
                )
        record = FeedbackRecord(
            feedback_id="fb-" + uuid.uuid4().hex[:16],
            query_id=query_id,
            query_text=session["query_text"],
            judgments=[{"paragraph_id": j["paragraph_id"], "label": j["label"]}
                       for j in judgments],
            comment=comment,
            annotator=annotator,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )
        self.log.append(record)
        return record.feedback_id

    def export_judgments(self, since: str | None = None,
                         annotator: str | None = None) -> tuple[JudgmentSet, list[dict]]:
        return materialize_judgments(self.log.replay(), since=since, annotator=annotator)


def create_app(service: SearchService) -> FastAPI:
    """FastAPI wrapper; all error bodies are {"code", "message"}."""
    app = FastAPI(title="briefbank", docs_url=None, redoc_url=None)

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"code": status, "message": message})

    @app.middleware("http")
    async def rate_limiter(request: Request, call_next):
        if not service._check_rate():
            return error(429, "rate limit exceeded")
        return await call_next(request)

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "paragraphs": len(service.stores.paragraphs)}

    @app.post("/v1/search")
    async def search(request: Request):
        try:
            body = await request.json()
        except Exception:
            return error(400, "body must be JSON")
        try:
            response = service.handle_search(
                query_text=body.get("query_text", ""),
                k=body.get("k"),
                expand=body.get("expand"),
                rerank=body.get("rerank"),
            )
        except ValidationError as exc:
            return error(400, str(exc))
        except Exception as exc:  # stores not loaded / internal faults
            return error(503, f"search unavailable: {exc}")
        return response.to_dict(include_timings=True)

    @app.post("/v1/feedback")
    async def feedback(request: Request):
        try:
            body = await request.json()
        except Exception:
            return error(400, "body must be JSON")
        try:
            feedback_id = service.record_feedback(
                query_id=body.get("query_id", ""),
                judgments=body.get("judgments", []),
                comment=body.get("comment", ""),
                annotator=body.get("annotator", "anonymous"),
            )
        except ValidationError as exc:
            return error(400, str(exc))
        except OSError as exc:
            return error(500, f"feedback not stored: {exc}")
        return {"feedback_id": feedback_id}

    @app.get("/v1/judgments/export")
    async def export(since: str | None = None, annotator: str | None = None,
                     format: str = "json"):
        judgments, comments = service.export_judgments(since=since, annotator=annotator)
        lines = [
            f"{qid}\t{pid}\t{1 if label == 'relevant' else 0}"
            for (qid, pid), label in sorted(judgments.labels.items())
        ]
        if format == "tsv":
            return PlainTextResponse("\n".join(lines) + ("\n" if lines else ""))
        return {"qrels_tsv": "\n".join(lines) + ("\n" if lines else ""),
                "comments": comments}

    @app.get("/v1/paragraphs/{paragraph_id}")
    async def paragraph(paragraph_id: str):
        store = service.stores.paragraphs
        if paragraph_id not in store:
            return error(404, f"unknown paragraph_id {paragraph_id!r}")
        p = store.get(paragraph_id)
        doc = store.document_for(paragraph_id)
        return {
            "paragraph_id": p.paragraph_id,
            "doc_id": p.doc_id,
            "ordinal": p.ordinal,
            "text": p.text,
            "title": doc.title if doc else None,
            "filing_date": doc.filing_date.isoformat() if doc and doc.filing_date else None,
        }

    return app


@dataclass
class ServiceConfig:
    """File-backed service wiring, loadable from the BRIEFBANK_CONFIG path."""

    paragraphs_path: str
    documents_path: str | None = None
    vectors_dir: str | None = None
    lexical_snapshot: str | None = None
    feedback_log_path: str = "feedback.log.jsonl"
    bind_host: str = "127.0.0.1"
    bind_port: int = 8080
    rate_limit_per_sec: float = 0.0
    pipeline: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text())
        return cls(**raw)

    @classmethod
    def from_env(cls) -> "ServiceConfig":
        path = os.environ.get("BRIEFBANK_CONFIG")
        if not path:
            raise ValidationError("BRIEFBANK_CONFIG is not set")
        return cls.from_file(path)
