"""Record the HTTP contract fixtures the front-end tests pin against.

Runs the real service in-process over the canonical fixture corpus, sends
the exact bytes the browser client produces, verifies the service accepts
them, and freezes request and response bodies under tests/fixtures/.

Run from the repository root after changing either side of the contract:

    python frontend/scripts/record_fixtures.py
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from briefbank.corpus import ParagraphStore
from briefbank.dense import DeterministicMockProvider, build_vector_store
from briefbank.fixtures import make_synthetic_corpus
from briefbank.lexical import build_lexical_index
from briefbank.retrieval import SearchStores
from briefbank.service import SearchService, create_app

FIXTURE_DIR = Path(__file__).parent.parent / "tests" / "fixtures"


def compact(obj) -> bytes:
    # byte-compatible with JSON.stringify: compact separators, raw unicode
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def main():
    corp = make_synthetic_corpus(seed=7, n_docs=6, n_paragraphs=40)
    provider = DeterministicMockProvider()
    stores = SearchStores(
        paragraphs=ParagraphStore(corp.paragraphs, corp.documents),
        vectors=build_vector_store(corp.paragraphs, provider),
        embedder=provider,
        lexical=build_lexical_index(corp.paragraphs),
    )
    log_path = Path(tempfile.mkdtemp()) / "feedback.log.jsonl"
    client = TestClient(create_app(SearchService(stores, feedback_log_path=log_path)))
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)

    query = corp.queries[0]
    search_request = compact({"query_text": query.text, "k": 5})
    resp = client.post("/v1/search", content=search_request,
                       headers={"Content-Type": "application/json"})
    assert resp.status_code == 200, resp.text
    (FIXTURE_DIR / "search_request.json").write_bytes(search_request)
    (FIXTURE_DIR / "search_response.json").write_bytes(resp.content)

    body = resp.json()
    results = body["results"]
    assert len(results) == 5
    # the annotator judges three of five and leaves two unset
    judgments = [
        {"paragraph_id": r["paragraph_id"],
         "label": "relevant" if r["paragraph_id"] in query.gold_ids else "irrelevant"}
        for r in results[:3]
    ]
    feedback_request = compact({
        "query_id": body["query_id"],
        "judgments": judgments,
        "comment": "top result directly on point",
        "annotator": "pd-ui",
    })
    ack = client.post("/v1/feedback", content=feedback_request,
                      headers={"Content-Type": "application/json"})
    assert ack.status_code == 200, ack.text
    (FIXTURE_DIR / "feedback_request.json").write_bytes(feedback_request)
    (FIXTURE_DIR / "feedback_ack.json").write_bytes(ack.content)

    # an error case the banner path renders
    bad = client.post("/v1/feedback", content=compact({
        "query_id": "q-unknown", "judgments": [], "comment": "x"}),
        headers={"Content-Type": "application/json"})
    assert bad.status_code == 400
    (FIXTURE_DIR / "feedback_error.json").write_bytes(bad.content)

    print(f"fixtures recorded in {FIXTURE_DIR}")
    for f in sorted(FIXTURE_DIR.iterdir()):
        print(f"  {f.name}: {f.stat().st_size} bytes")


if __name__ == "__main__":
    main()
