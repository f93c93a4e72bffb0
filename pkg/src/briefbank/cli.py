"""Command-line entry points.

Subcommands: ingest, index, search, serve, eval, pool, curate, synth,
expand. Every subcommand accepts --config pointing at a JSON file whose
keys provide flag defaults. Exit status 0 on success, nonzero with a
message on stderr otherwise.

Offline by default: indexing and the generative roles use the deterministic
mock providers unless endpoint URLs are configured (flags or BRIEFBANK_*
environment variables).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import curation as curation_mod
from . import evalsuite as eval_mod
from .dense import DeterministicMockProvider, RemoteEmbeddingProvider, VectorStore, build_vector_store
from .errors import BriefBankError
from .fixtures import make_demo_gateway
from .lexical import build_lexical_index, load_index_snapshot, save_index_snapshot
from .llmgateway import LLMGateway, expand_query
from .retrieval import OverlapReranker, PipelineConfig, RemoteReranker, SearchStores, pool_candidates
from .service import SearchService, create_app


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _merge_defaults(args: argparse.Namespace, config: dict) -> argparse.Namespace:
    for key, value in config.items():
        if getattr(args, key, None) in (None, False):
            setattr(args, key, value)
    return args


def _embedder(args):
    url = getattr(args, "embed_url", None)
    if url:
        return RemoteEmbeddingProvider(endpoint_url=url)
    return DeterministicMockProvider(dims=getattr(args, "dims", 64) or 64,
                                     seed=getattr(args, "seed", 0) or 0)


def _gateway(args):
    if getattr(args, "mock_llm", False):
        return make_demo_gateway()
    gateway = LLMGateway.from_env()
    return gateway if gateway.endpoints else None


def _reranker(args):
    url = getattr(args, "rerank_url", None)
    if url:
        return RemoteReranker(endpoint_url=url)
    if getattr(args, "mock_llm", False):
        return OverlapReranker()
    return None


def _load_stores(args) -> SearchStores:
    workdir = Path(args.workdir)
    paragraphs_path = workdir / "paragraphs.jsonl"
    if not paragraphs_path.exists():
        raise BriefBankError(
            f"{paragraphs_path} not found: run `briefbank ingest` first"
        )
    paragraphs = corpus_mod.read_paragraphs_jsonl(paragraphs_path)
    documents = []
    documents_path = workdir / "documents.jsonl"
    if documents_path.exists():
        documents = corpus_mod.read_documents_jsonl(documents_path)
    store = corpus_mod.ParagraphStore(paragraphs, documents)
    vectors_dir = workdir / "vectors"
    if not (vectors_dir / "manifest.json").exists():
        raise BriefBankError(
            f"{vectors_dir} has no vector store: run `briefbank index` first"
        )
    vectors = VectorStore.load(vectors_dir)
    lexical = None
    snapshot = workdir / "lexical.bblx"
    if snapshot.exists():
        lexical = load_index_snapshot(snapshot)
    return SearchStores(paragraphs=store, vectors=vectors,
                        embedder=_embedder(args), lexical=lexical)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    documents = corpus_mod.read_documents_jsonl(args.documents)
    segmenter = corpus_mod.SegmenterConfig(min_words=args.min_words,
                                           max_words=args.max_words)
    paragraphs = []
    for doc in documents:
        paragraphs.extend(corpus_mod.segment_document(doc, segmenter))
    unique, dropped = corpus_mod.deduplicate(paragraphs)
    corpus_mod.write_documents_jsonl(documents, workdir / "documents.jsonl")
    corpus_mod.write_paragraphs_jsonl(unique, workdir / "paragraphs.jsonl")
    (workdir / "dedup_map.json").write_text(json.dumps(dropped, indent=2, sort_keys=True))
    store = corpus_mod.ParagraphStore(unique, documents)
    stats = corpus_mod.corpus_stats(store)
    print(f"ingested {len(documents)} documents -> {len(unique)} unique paragraphs "
          f"({len(dropped)} duplicates dropped)")
    print(f"avg paragraph length: {stats.avg_paragraph_len_words:.1f} words, "
          f"TTR: {stats.type_token_ratio:.3f}")
    return 0


def cmd_index(args) -> int:
    workdir = Path(args.workdir)
    paragraphs_path = workdir / "paragraphs.jsonl"
    if not paragraphs_path.exists():
        raise BriefBankError(f"{paragraphs_path} not found: run `briefbank ingest` first")
    paragraphs = corpus_mod.read_paragraphs_jsonl(paragraphs_path)
    index = build_lexical_index(paragraphs)
    save_index_snapshot(index, workdir / "lexical.bblx")
    provider = _embedder(args)
    store = build_vector_store(paragraphs, provider,
                               checkpoint_dir=workdir / "vectors.checkpoint")
    store.save(workdir / "vectors")
    print(f"indexed {len(paragraphs)} paragraphs "
          f"(lexical terms: {len(index.postings)}, vector dims: {store.dims}, "
          f"provider: {store.provider_tag})")
    return 0


def cmd_search(args) -> int:
    stores = _load_stores(args)
    service = SearchService(stores, feedback_log_path=Path(args.workdir) / "feedback.log.jsonl",
                            gateway=_gateway(args), reranker=_reranker(args),
                            pipeline=PipelineConfig(
                                use_expansion=bool(args.expand),
                                use_rerank=bool(args.rerank),
                            ))
    response = service.handle_search(args.query, k=args.k)
    for r in response.results:
        day = r.filing_date.isoformat() if r.filing_date else "undated"
        print(f"{r.rank}. [{day}] {r.title} ({r.paragraph_id}, score {r.score:.4f})")
        print(f"   {r.snippet}")
        if r.summary:
            print(f"   summary: {r.summary}")
    if not response.results:
        print("no results", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    stores = _load_stores(args)
    service = SearchService(
        stores,
        feedback_log_path=args.feedback_log or Path(args.workdir) / "feedback.log.jsonl",
        gateway=_gateway(args),
        reranker=_reranker(args),
        rate_limit_per_sec=args.rate_limit,
    )
    app = create_app(service)
    print(f"serving on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_eval(args) -> int:
    run = eval_mod.load_run_file(args.run)
    judgments = eval_mod.JudgmentSet.from_qrels_tsv(args.qrels)
    if args.queries:
        queries = []
        with open(args.queries, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    rec = json.loads(line)
                    queries.append(eval_mod.Query(
                        query_id=str(rec["query_id"]), text=rec["text"],
                        gold_ids=set(rec.get("gold_paragraph_ids", [])),
                        intent_tag=rec.get("intent_tag"),
                        strategy_tag=rec.get("strategy_tag"),
                    ))
    else:
        gold: dict[str, set[str]] = {}
        for (qid, pid), label in judgments.labels.items():
            if label == "relevant":
                gold.setdefault(qid, set()).add(pid)
        queries = [eval_mod.Query(query_id=qid, text=qid, gold_ids=ids)
                   for qid, ids in sorted(gold.items())]
    report = eval_mod.evaluate_run(run, queries, run_tag=args.run_tag,
                                   dataset_tag=args.dataset_tag)
    print(f"run {report.run_tag} on {report.dataset_tag}: "
          f"{report.n_queries} queries ({report.n_excluded_empty_gold} excluded)")
    for metric in eval_mod.REPORT_METRICS:
        print(f"  {metric:10s} {report.aggregates[metric] * 100:6.2f}")
    if args.out:
        eval_mod.emit_report(report, args.format, args.out)
        print(f"report written to {args.out}")
    return 0


def cmd_pool(args) -> int:
    stores = _load_stores(args)
    queries, _, _ = eval_mod.load_dataset(args.queries,
                                          Path(args.workdir) / "paragraphs.jsonl")
    with open(args.out, "w", encoding="utf-8") as f:
        for q in queries:
            pool = pool_candidates(q.text, q.gold_ids, stores, query_id=q.query_id)
            f.write(json.dumps({
                "query_id": q.query_id,
                "candidates": [
                    {"paragraph_id": pid, "provenance": sorted(prov)}
                    for pid, prov in sorted(pool.candidates.items())
                ],
            }) + "\n")
            print(f"{q.query_id}: {len(pool)} candidates")
    return 0


def cmd_curate(args) -> int:
    stores = _load_stores(args)
    queries, _, _ = eval_mod.load_dataset(args.queries,
                                          Path(args.workdir) / "paragraphs.jsonl")
    gateway = _gateway(args) or make_demo_gateway()
    reranker = _reranker(args) or OverlapReranker()
    tasks, drop_log = curation_mod.build_annotation_tasks(queries, stores, gateway, reranker)
    curation_mod.write_annotation_tasks(tasks, args.out)
    if args.drop_log:
        with open(args.drop_log, "w", encoding="utf-8") as f:
            for entry in drop_log:
                f.write(json.dumps({"query_id": entry.query_id,
                                    "reason": entry.reason}) + "\n")
    print(f"{len(tasks)} annotation tasks written to {args.out} "
          f"({len(drop_log)} queries dropped)")
    return 0


def cmd_synth(args) -> int:
    paragraphs = corpus_mod.read_paragraphs_jsonl(Path(args.workdir) / "paragraphs.jsonl")
    gateway = _gateway(args) or make_demo_gateway()
    reranker = _reranker(args) or OverlapReranker()
    gold_ids: set[str] = set()
    if args.queries:
        queries, _, _ = eval_mod.load_dataset(args.queries,
                                              Path(args.workdir) / "paragraphs.jsonl")
        gold_ids = {gid for q in queries for gid in q.gold_ids}
    config = curation_mod.CurationConfig(reranker_threshold=args.threshold)
    pairs = curation_mod.generate_synthetic_dataset(
        paragraphs, gateway, reranker, config, gold_target_ids=gold_ids)
    kept = curation_mod.export_training_pairs(pairs, paragraphs, args.out)
    if args.drop_log:
        curation_mod.write_drop_log(pairs, args.drop_log)
    counts = curation_mod.drop_accounting(pairs)
    print(f"{kept} training pairs kept of {len(pairs)} paragraphs; drops: "
          + ", ".join(f"{k}={v}" for k, v in counts.items() if k != "none" and v))
    return 0


def cmd_expand(args) -> int:
    gateway = _gateway(args)
    if gateway is None:
        gateway = make_demo_gateway() if args.mock_llm else LLMGateway.from_env()
    expanded = expand_query(gateway, args.query)
    print(f"original:  {expanded.original}")
    print(f"issue:     {expanded.issue}")
    print(f"rule:      {expanded.rule}")
    print(f"analysis:  {expanded.analysis}")
    print(f"augmented: {expanded.augmented}")
    if expanded.degraded:
        print("(degraded: expansion endpoint unavailable or reply unparseable)",
              file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="briefbank",
                                     description="paragraph retrieval over legal briefs")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON file providing flag defaults")
        p.add_argument("--workdir", default="briefbank-data",
                       help="directory for stores and indexes")
        p.add_argument("--embed-url", dest="embed_url",
                       help="remote embedding endpoint (default: deterministic mock)")
        p.add_argument("--rerank-url", dest="rerank_url", help="remote rerank endpoint")
        p.add_argument("--mock-llm", dest="mock_llm", action="store_true",
                       help="use the offline demo gateway for generative roles")
        p.add_argument("--dims", type=int, default=64, help="mock embedder dimensions")
        p.add_argument("--seed", type=int, default=0, help="mock embedder seed")

    p = sub.add_parser("ingest", help="documents.jsonl -> paragraph store")
    add_common(p)
    p.add_argument("--documents", required=True)
    p.add_argument("--min-words", dest="min_words", type=int, default=40)
    p.add_argument("--max-words", dest="max_words", type=int, default=400)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build lexical + dense indexes")
    add_common(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="one-shot query to stdout")
    add_common(p)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--expand", action="store_true")
    p.add_argument("--rerank", action="store_true")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("serve", help="start the HTTP service")
    add_common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--feedback-log", dest="feedback_log")
    p.add_argument("--rate-limit", dest="rate_limit", type=float, default=0.0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("eval", help="run file + qrels -> metrics report")
    add_common(p)
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--queries")
    p.add_argument("--run-tag", dest="run_tag", default="run")
    p.add_argument("--dataset-tag", dest="dataset_tag", default="dataset")
    p.add_argument("--format", choices=("json", "csv", "markdown"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pool", help="candidate pools for dataset construction")
    add_common(p)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("curate", help="build annotation tasks")
    add_common(p)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--drop-log", dest="drop_log")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("synth", help="generate + filter synthetic training pairs")
    add_common(p)
    p.add_argument("--queries", help="queries.jsonl for gold-target exclusion")
    p.add_argument("--out", required=True)
    p.add_argument("--drop-log", dest="drop_log")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("expand", help="print the expanded form of one query")
    add_common(p)
    p.add_argument("--query", required=True)
    p.set_defaults(func=cmd_expand)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _merge_defaults(args, _load_config(args.config))
    try:
        return args.func(args)
    except BriefBankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
