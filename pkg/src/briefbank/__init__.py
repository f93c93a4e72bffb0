"""briefbank: paragraph-level retrieval over appellate briefs and directives.

Library layers: corpus ingestion and segmentation, a BM25 inverted index,
an exact-scan vector store, an LLM gateway (expansion, judging, summaries,
synthetic queries) with deterministic mocks, the serving pipeline, a
retrieval benchmark harness, curation pipelines, and an HTTP service with
relevance-feedback capture.
"""

__version__ = "0.1.0"
