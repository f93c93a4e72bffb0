"""The live annotation loop over the HTTP service: search, judge results,
leave freeform feedback, export qrels for the evaluation harness.

Runs the FastAPI app in-process via the test client; `briefbank serve`
exposes the same endpoints over a real socket.
"""

import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from briefbank.corpus import ParagraphStore
from briefbank.dense import DeterministicMockProvider, build_vector_store
from briefbank.fixtures import make_synthetic_corpus
from briefbank.lexical import build_lexical_index
from briefbank.retrieval import SearchStores
from briefbank.service import SearchService, create_app

corp = make_synthetic_corpus(seed=7, n_docs=6, n_paragraphs=40)
provider = DeterministicMockProvider()
stores = SearchStores(
    paragraphs=ParagraphStore(corp.paragraphs, corp.documents),
    vectors=build_vector_store(corp.paragraphs, provider),
    embedder=provider,
    lexical=build_lexical_index(corp.paragraphs),
)
log_path = Path(tempfile.mkdtemp()) / "feedback.log.jsonl"
service = SearchService(stores, feedback_log_path=log_path)
client = TestClient(create_app(service))

# 1. A defender submits a query.
query = corp.queries[0]
search = client.post("/v1/search", json={"query_text": query.text, "k": 5}).json()
print(f"search {search['query_id']} returned {len(search['results'])} results")
for r in search["results"]:
    print(f"  {r['rank']}. [{r['filing_date'] or 'undated'}] {r['title']}")

# 2. They judge a subset of the results and add a comment.
judgments = [
    {"paragraph_id": r["paragraph_id"],
     "label": "relevant" if r["paragraph_id"] in query.gold_ids else "irrelevant"}
    for r in search["results"][:4]  # annotators often skip some results
]
ack = client.post("/v1/feedback", json={
    "query_id": search["query_id"],
    "judgments": judgments,
    "comment": "top result is exactly the argument I needed",
    "annotator": "pd-demo",
}).json()
print(f"\nfeedback acknowledged: {ack['feedback_id']}")

# 3. A second pass overwrites one label; the log keeps both, export keeps the latest.
flipped = [{"paragraph_id": judgments[0]["paragraph_id"], "label": "irrelevant"}]
client.post("/v1/feedback", json={"query_id": search["query_id"],
                                  "judgments": flipped, "annotator": "pd-demo"})

export = client.get("/v1/judgments/export").json()
print(f"\nexported qrels (latest label wins):\n{export['qrels_tsv']}")
print(f"comments: {[c['comment'] for c in export['comments']]}")
print(f"append-only log at {log_path} has "
      f"{len(log_path.read_text().splitlines())} records")
