"""Command-line entry points (`climafact <subcommand>`)."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

from . import dense, fid, harness, metrics, sparse
from .corpus import PassageStore, ingest_corpus
from .datasets import (EXPECTED_FEV_COUNTS, FEEDBACK_SPLIT_SIZES, build_fev,
                       feedback_splits, load_claim_corpus, load_feedback,
                       save_records, stratified_split)
from .retrievers import DenseSearcher, SparseSearcher, query_vectors_from_embedding_file

logger = logging.getLogger(__name__)


class CliError(Exception):
    """User-facing command-line errors (bad flags, malformed inputs)."""

# Split ratios implied by the reference claim counts of each derivation.
FEV_SPLIT_RATIOS = {
    "fev2": (680 / 907, 50 / 907, 177 / 907),
    "fev3": (963 / 1378, 83 / 1378, 332 / 1378),
}


def _hit_dict(hit: sparse.RetrievalHit) -> dict:
    return {"passage_id": hit.passage_id, "score": hit.score, "rank": hit.rank}


def cmd_ingest(args) -> int:
    store = ingest_corpus(args.input, format=args.format, source_label=args.source_label)
    store.save(args.out)
    print(f"ingested {len(store)} passages ({store.total_words()} words) -> {args.out}")
    return 0


def cmd_index_sparse(args) -> int:
    store = PassageStore.load(args.store)
    index = sparse.build_index(store)
    index.save(args.out)
    print(f"indexed {index.N} passages, {len(index.postings)} terms -> {args.out}")
    return 0


def cmd_index_dense(args) -> int:
    store = PassageStore.load(args.store)
    index = dense.build_dense_index(store, args.embeddings, keep_vectors=args.keep_vectors)
    index.save(args.out)
    print(f"indexed {len(index)} codes (dim {index.dim}) -> {args.out}")
    return 0


def _load_claims_file(path) -> list[tuple[str, str]]:
    claims = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            text = obj.get("text", obj.get("claim"))
            if text is None:
                raise CliError(f"{path}: line {line_no}: no claim text field")
            claims.append((str(obj.get("claim_id", line_no - 1)), text))
    return claims


def cmd_retrieve(args) -> int:
    store = PassageStore.load(args.store) if args.store else None
    if args.method == "bm25":
        index = sparse.InvertedIndex.load(args.index)
        linker = None
        if args.entity_augment:
            if not args.linker_url:
                raise CliError("--entity-augment requires --linker-url")
            from .linking import EntityLinker, LinkerConfig
            linker = EntityLinker(LinkerConfig(
                base_url=args.linker_url,
                confidence=args.linker_confidence,
                cache_dir=args.linker_cache,
            ))
        if store or linker:
            searcher = SparseSearcher(index, store, linker=linker)
            search = lambda cid, text: searcher.retrieve(cid, text, args.k)
        else:
            search = lambda cid, text: index.search(text, args.k)
    elif args.method == "bpr":
        index = dense.DenseIndex.load(args.index)
        if not args.query_embeddings and not args.encode_endpoint:
            raise CliError("bpr retrieval needs --query-embeddings or --encode-endpoint")
        claim_ids = []
        if args.claims:
            claim_ids = [cid for cid, _ in _load_claims_file(args.claims)]
        vectors = (query_vectors_from_embedding_file(args.query_embeddings, claim_ids)
                   if args.query_embeddings else None)
        encoder = fid.EncoderClient(args.encode_endpoint) if args.encode_endpoint else None
        searcher = DenseSearcher(index, store, query_vectors=vectors, encoder=encoder,
                                 n_candidates=args.candidates)
        search = lambda cid, text: searcher.retrieve(cid, text, args.k)
    else:
        raise CliError(f"unknown method {args.method}")

    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        if args.query is not None:
            hits = search("query", args.query)
            out.write(json.dumps({"query": args.query,
                                  "hits": [_hit_dict(h) for h in hits]}) + "\n")
        else:
            for claim_id, text in _load_claims_file(args.claims):
                hits = search(claim_id, text)
                out.write(json.dumps({"claim_id": claim_id,
                                      "hits": [_hit_dict(h) for h in hits]}) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_build_dataset(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.source == "cfever":
        claims = load_claim_corpus(args.input)
        records, report = build_fev(claims, args.mode)
        split = stratified_split(records, FEV_SPLIT_RATIOS[args.mode], args.seed)
        for name, part in split.parts().items():
            save_records(part, os.path.join(args.out, f"{name}.jsonl"))
        with open(os.path.join(args.out, "delta_report.json"), "w", encoding="utf-8") as fh:
            json.dump(report.deltas(), fh, indent=2)
        expected = EXPECTED_FEV_COUNTS[args.mode]
        print(f"{args.mode}: kept {report.claims_kept} claims / {report.pairs_kept} pairs "
              f"(reference totals {expected[0]}/{expected[1]}) -> {args.out}")
    else:
        records = load_feedback(args.input)
        seeds = args.seeds if args.seeds else list(range(5))
        for split in feedback_splits(records, seeds):
            seed_dir = os.path.join(args.out, f"seed_{split.seed}")
            os.makedirs(seed_dir, exist_ok=True)
            for name, part in split.parts().items():
                save_records(part, os.path.join(seed_dir, f"{name}.jsonl"))
        print(f"feedback: {len(records)} records split "
              f"{'/'.join(map(str, FEEDBACK_SPLIT_SIZES))} across seeds "
              f"{','.join(map(str, seeds))} -> {args.out}")
    return 0


def _load_predictions(path) -> dict[str, fid.FidOutput]:
    predictions: dict[str, fid.FidOutput] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            claim_id = str(obj["claim_id"])
            if "raw" in obj and ("label" not in obj or "explanation" not in obj):
                predictions[claim_id] = fid.parse_output(obj["raw"])
            else:
                label = obj.get("label", fid.UNPARSEABLE)
                try:
                    from .datasets import VeracityLabel
                    label = VeracityLabel(label)
                except ValueError:
                    label = fid.UNPARSEABLE
                predictions[claim_id] = fid.FidOutput(
                    label=label,
                    explanation=obj.get("explanation", ""),
                    raw=obj.get("raw", ""),
                )
    return predictions


def cmd_evaluate(args) -> int:
    from .datasets import load_records

    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    records = load_records(args.dataset)
    predictions = _load_predictions(args.predictions)

    emb_table = None
    if "bscore" in wanted:
        if not args.token_embeddings:
            raise CliError("bscore requires --token-embeddings")
        emb_table = metrics.load_token_embeddings(args.token_embeddings)

    rouge1s, rougeLs, bscores = [], [], []
    predicted_labels, gold_labels = [], []
    matched = 0
    for record in records:
        output = predictions.get(record.claim_id)
        if output is None:
            continue
        matched += 1
        pair = metrics.ScoredPair(candidate=output.explanation,
                                  references=tuple(record.references))
        if "rouge1" in wanted:
            rouge1s.append(metrics.rouge_n(pair, n=1)[2])
        if "rougeL" in wanted:
            rougeLs.append(metrics.rouge_l(pair)[2])
        if "acc" in wanted:
            predicted_labels.append(output.label)
            gold_labels.append(record.overall_label)
        if "bscore" in wanted and emb_table is not None:
            cand = emb_table.get(output.explanation)
            refs = [emb_table[r] for r in record.references if r in emb_table]
            if cand is not None and refs:
                bscores.append(metrics.bert_score_rescaled(cand, refs, args.bscore_baseline))

    def mean(xs):
        return sum(xs) / len(xs) if xs else None

    report = metrics.EvalReport(
        b_score_rs=mean(bscores),
        rouge1_f=mean(rouge1s),
        rougeL_f=mean(rougeLs),
        accuracy=(metrics.accuracy(predicted_labels, gold_labels)
                  if predicted_labels else None),
        n={"records": len(records), "matched": matched, "bscore": len(bscores)},
    )

    if args.annotations:
        sets = metrics.load_annotations(args.annotations)
        alphas = {task: metrics.krippendorff_alpha(s) for task, s in sets.items()}
        report.alpha = mean(list(alphas.values()))
        true_labels = None
        if args.true_labels:
            with open(args.true_labels, encoding="utf-8") as fh:
                true_labels = json.load(fh)
        report.mar, report.v_agree = metrics.manual_eval_stats(sets, true_labels)
        report.n["annotation_tasks"] = len(sets)

    payload = report.to_dict()
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    print(json.dumps(payload, indent=2))
    return 0


def cmd_experiment(args) -> int:
    config = harness.ExperimentConfig.from_json(args.config)
    if args.sweep:
        cells = harness.run_sweep(config)
    else:
        cells = [harness.run_cell(config)]
    harness.write_outputs(cells, args.out)
    bad = sum(not cell.valid for cell in cells)
    print(f"wrote {len(cells)} cell(s) to {args.out}" + (f" ({bad} invalid)" if bad else ""))
    return 0 if bad == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="climafact")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a passage store from a corpus file")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["tsv", "jsonl"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--source-label", default="")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index-sparse", help="build the BM25 inverted index")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index_sparse)

    p = sub.add_parser("index-dense", help="binarize embeddings into a dense index")
    p.add_argument("--store", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--keep-vectors", action="store_true")
    p.set_defaults(func=cmd_index_dense)

    p = sub.add_parser("retrieve", help="run queries against an index")
    p.add_argument("--index", required=True)
    p.add_argument("--method", choices=["bm25", "bpr"], required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--candidates", type=int, default=None)
    p.add_argument("--query")
    p.add_argument("--claims", help="JSONL batch of claims; output is JSONL of hit lists")
    p.add_argument("--store")
    p.add_argument("--query-embeddings")
    p.add_argument("--encode-endpoint")
    p.add_argument("--entity-augment", action="store_true",
                   help="extend bm25 queries with linked-entity concepts")
    p.add_argument("--linker-url")
    p.add_argument("--linker-confidence", type=float, default=0.5)
    p.add_argument("--linker-cache")
    p.add_argument("--out")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("build-dataset", help="derive claim/explanation datasets")
    p.add_argument("--source", choices=["cfever", "feedback"], required=True)
    p.add_argument("--mode", choices=["fev2", "fev3"], default="fev2")
    p.add_argument("--input", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, nargs="*", help="feedback split seeds (default 0..4)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("evaluate", help="score a predictions file against a dataset")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--metrics", default="rouge1,rougeL,acc")
    p.add_argument("--token-embeddings")
    p.add_argument("--bscore-baseline", type=float, default=0.0)
    p.add_argument("--annotations", help="CSV item_id,annotator_id,task,value")
    p.add_argument("--true-labels", help="JSON mapping item_id -> true value")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run experiment cells from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sweep", action="store_true", help="sweep the default k values")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # surfaced as a clean CLI error, not a traceback
        if os.environ.get("CLIMAFACT_DEBUG"):
            raise
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
