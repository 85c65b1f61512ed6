"""climafact: retrieval-augmented verification and explanation of climate claims.

The package is organized around the pipeline stages:

* :mod:`climafact.corpus` — knowledge-source ingestion and passage stores
* :mod:`climafact.sparse` / :mod:`climafact.linking` — BM25 with optional
  entity-concept query augmentation
* :mod:`climafact.dense` — binary-code candidate generation + inner-product rerank
* :mod:`climafact.datasets` — claim/explanation dataset derivation and splits
* :mod:`climafact.fid` — generator input/output protocol and backends
* :mod:`climafact.metrics` — explanation, veracity, and annotator statistics
* :mod:`climafact.harness` — experiment cells, sweeps, and reports
"""

from .corpus import (Document, Passage, PassageStore, ingest_corpus,
                     normalize_text, segment_document)
from .datasets import (ClaimRecord, DatasetSplit, EvidenceSentence,
                       VeracityLabel, aggregate_label, build_fev,
                       feedback_splits, load_feedback, stratified_split)
from .dense import (BinaryCode, DenseIndex, binarize, build_dense_index,
                    candidates, hamming_distance, rerank, search_dense)
from .fid import (EchoBackend, FidInput, FidOutput, RemoteBackend,
                  Top1Backend, UNPARSEABLE, assemble, format_output,
                  parse_output, top1_explanation)
from .harness import ExperimentCell, ExperimentConfig, run_cell, run_sweep
from .linking import EntityLinker, EntityMention, LinkerConfig, link_entities
from .metrics import (AnnotationSet, EvalReport, ScoredPair, TokenEmbeddings,
                      accuracy, bert_score_rescaled, krippendorff_alpha,
                      manual_eval_stats, recall_at_k, rouge_l, rouge_n)
from .sparse import InvertedIndex, RetrievalHit, build_index, tokenize

__version__ = "0.1.0"

__all__ = [
    "Document", "Passage", "PassageStore", "ingest_corpus", "normalize_text",
    "segment_document",
    "ClaimRecord", "DatasetSplit", "EvidenceSentence", "VeracityLabel",
    "aggregate_label", "build_fev", "feedback_splits", "load_feedback",
    "stratified_split",
    "BinaryCode", "DenseIndex", "binarize", "build_dense_index", "candidates",
    "hamming_distance", "rerank", "search_dense",
    "EchoBackend", "FidInput", "FidOutput", "RemoteBackend", "Top1Backend",
    "UNPARSEABLE", "assemble", "format_output", "parse_output", "top1_explanation",
    "ExperimentCell", "ExperimentConfig", "run_cell", "run_sweep",
    "EntityLinker", "EntityMention", "LinkerConfig", "link_entities",
    "AnnotationSet", "EvalReport", "ScoredPair", "TokenEmbeddings", "accuracy",
    "bert_score_rescaled", "krippendorff_alpha", "manual_eval_stats",
    "recall_at_k", "rouge_l", "rouge_n",
    "InvertedIndex", "RetrievalHit", "build_index", "tokenize",
]
