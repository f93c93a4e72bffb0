"""Dataset-construction pipelines: candidate pooling, judge + rerank
filtering into annotation tasks, and synthetic training-pair generation
with full drop accounting.
"""

from briefbank.corpus import ParagraphStore
from briefbank.curation import (
    CurationConfig,
    build_annotation_tasks,
    drop_accounting,
    generate_synthetic_dataset,
)
from briefbank.dense import DeterministicMockProvider, build_vector_store
from briefbank.fixtures import make_demo_gateway, make_synthetic_corpus
from briefbank.lexical import build_lexical_index
from briefbank.retrieval import OverlapReranker, PipelineConfig, SearchStores, pool_candidates

corp = make_synthetic_corpus(seed=13, n_docs=6, n_paragraphs=60)
provider = DeterministicMockProvider()
stores = SearchStores(
    paragraphs=ParagraphStore(corp.paragraphs, corp.documents),
    vectors=build_vector_store(corp.paragraphs, provider),
    embedder=provider,
    lexical=build_lexical_index(corp.paragraphs),
)
gateway = make_demo_gateway()
reranker = OverlapReranker()

# 1. Candidate pooling: dense top-N + lexical top-M + neighbors of each gold.
q = corp.queries[0]
pool = pool_candidates(q.text, q.gold_ids, stores,
                       config=PipelineConfig(dense_n=25, lexical_n=5))
print(f"pool for {q.query_id}: {len(pool)} candidates "
      f"(bound {25 + 5} + 10 per gold, {len(q.gold_ids)} gold)")
provenance_counts = {}
for prov_set in pool.candidates.values():
    for p in prov_set:
        provenance_counts[p] = provenance_counts.get(p, 0) + 1
print(f"provenance counts: {provenance_counts}\n")

# 2. Annotation tasks: judge filter, rerank, cap at seven for human review.
tasks, drop_log = build_annotation_tasks(
    corp.queries, stores, gateway, reranker,
    pipeline_config=PipelineConfig(dense_n=25, lexical_n=5))
print(f"annotation tasks: {len(tasks)} built, {len(drop_log)} queries dropped")
task = tasks[0]
print(f"task {task.query_id} ({task.query_text!r}):")
for c in task.candidates:
    print(f"  score {c.reranker_score:.2f} judge={c.judge_label:9s} {c.paragraph_id}")

# 3. Synthetic pairs: exclusion, content filter, generation, threshold filter.
gold_targets = {gid for q in corp.queries for gid in q.gold_ids}
pairs = generate_synthetic_dataset(
    corp.paragraphs, gateway, reranker,
    CurationConfig(reranker_threshold=0.3),
    gold_target_ids=gold_targets,
)
counts = drop_accounting(pairs)
print(f"\nsynthetic pairs over {len(pairs)} paragraphs:")
for reason, count in counts.items():
    label = "kept" if reason == "none" else f"dropped ({reason})"
    print(f"  {label:28s} {count}")
kept = [p for p in pairs if p.kept]
print(f"\nexample kept pair: {kept[0].query_text!r} -> {kept[0].paragraph_id}")
