"""Build a corpus, index it, and run the serving pipeline end to end.

Everything here is offline: the deterministic mock embedder stands in for a
remote embedding endpoint, and the demo gateway plays the generative roles.
Swap in RemoteEmbeddingProvider / LLMGateway.from_env() for real endpoints.
"""

from briefbank.corpus import ParagraphStore, corpus_stats
from briefbank.dense import DeterministicMockProvider, build_vector_store
from briefbank.fixtures import make_demo_gateway, make_synthetic_corpus
from briefbank.lexical import build_lexical_index, lexical_search
from briefbank.retrieval import OverlapReranker, PipelineConfig, SearchStores, retrieve

# 1. A seeded corpus: documents, paragraphs, queries with known-relevant targets.
corp = make_synthetic_corpus(seed=7, n_docs=6, n_paragraphs=40)
store = ParagraphStore(corp.paragraphs, corp.documents)
stats = corpus_stats(store)
print(f"corpus: {stats.n_documents} documents, {stats.n_paragraphs} paragraphs, "
      f"avg {stats.avg_paragraph_len_words:.1f} words/paragraph, "
      f"TTR {stats.type_token_ratio:.3f}\n")

# 2. Both retrieval legs: a BM25 inverted index and an exact-scan vector store.
provider = DeterministicMockProvider(dims=64)
stores = SearchStores(
    paragraphs=store,
    vectors=build_vector_store(corp.paragraphs, provider),
    embedder=provider,
    lexical=build_lexical_index(corp.paragraphs),
)

# 3. Keyword-style search keeps exact citation tokens.
print("BM25 for the literal query 'miranda':")
for e in lexical_search(stores.lexical, "miranda", 3).entries:
    print(f"  rank {e.rank}: {e.paragraph_id} (score {e.score:.3f})")

# 4. The full pipeline: expand -> retrieve -> rerank -> recency -> summarize.
query = corp.queries[0]
print(f"\nfull pipeline for: {query.text!r}")
response = retrieve(
    query.text,
    stores,
    gateway=make_demo_gateway(),
    reranker=OverlapReranker(),
    config=PipelineConfig(use_expansion=True, dense_n=20, lexical_n=5,
                          use_rerank=True, rerank_keep_threshold=0.1,
                          final_k=5, recency_sort=True),
)
for r in response.results:
    marker = "*" if r.paragraph_id in query.gold_ids else " "
    day = r.filing_date.isoformat() if r.filing_date else "undated"
    print(f" {marker} {r.rank}. [{day}] {r.title} (score {r.score:.2f})")
    print(f"      {r.summary}")
print(f"\ntrace: expanded={response.pipeline_trace['expanded']}, "
      f"reranked={response.pipeline_trace['reranked']}, "
      f"flags={response.pipeline_trace['flags']}")
print("(* = a paragraph annotated relevant for this query)")
