"""Experiment orchestration over {knowledge source} x {retriever} x {depth k}.

A cell evaluates one configuration: retrieve top-k passages per test claim,
assemble generator inputs, generate, parse, and score. Sweeps vary the
retrieval depth and emit plot-ready depth curves. All aggregates are plain
means, averaged over the configured seeds; reruns of a cell with a
deterministic backend reproduce the CSV byte for byte.
"""
from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import fid, metrics
from .corpus import PassageStore
from .datasets import ClaimRecord, load_records
from .dense import DenseIndex
from .fid import (EchoBackend, FidError, GenerationTransportError,
                  RemoteBackend, Top1Backend, claim_only_input)
from .linking import EntityLinker, LinkerConfig
from .retrievers import (DenseSearcher, RetrievalInputError, SparseSearcher,
                         query_vectors_from_embedding_file)
from .sparse import InvertedIndex

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_K_SWEEP = (1, 5, 10, 15, 20)


class HarnessError(Exception):
    pass


@dataclass
class ExperimentConfig:
    knowledge_source: str
    retriever: str  # "bm25" | "bpr"
    k: int
    test_dataset: str
    backend: dict = field(default_factory=lambda: {"kind": "echo"})
    seeds: list[int] = field(default_factory=lambda: [0])
    metrics: list[str] = field(default_factory=lambda: ["rouge1", "rougeL", "acc"])
    train_dataset: Optional[str] = None
    sparse_index: Optional[str] = None
    dense_index: Optional[str] = None
    query_embeddings: Optional[str] = None
    encode_endpoint: Optional[str] = None
    classify_endpoint: Optional[str] = None
    n_candidates: Optional[int] = None
    token_embeddings: Optional[str] = None
    bscore_baseline: float = 0.0
    max_tokens: int = fid.DEFAULT_MAX_TOKENS
    entity_augment: bool = False
    linker: Optional[dict] = None
    parallelism: int = 1

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        version = payload.pop("schema_version", None)
        if version != SCHEMA_VERSION:
            raise HarnessError(f"unsupported config schema_version {version!r}")
        try:
            return cls(**payload)
        except TypeError as exc:
            raise HarnessError(f"bad experiment config: {exc}") from exc

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION}
        out.update(vars(self))
        return out

    def replace(self, **kwargs) -> "ExperimentConfig":
        payload = dict(vars(self))
        payload.update(kwargs)
        return ExperimentConfig(**payload)


@dataclass
class PredictionRow:
    claim_id: str
    raw: str
    label: str
    explanation: str
    scores: dict

    def to_dict(self) -> dict:
        return dict(vars(self))


@dataclass
class ExperimentCell:
    config: dict
    report: metrics.EvalReport
    wall_time: float
    failures: list[str]
    evaluated: int
    predictions: list[PredictionRow] = field(default_factory=list)

    @property
    def failure_count(self) -> int:
        return len(self.failures)

    @property
    def valid(self) -> bool:
        return self.evaluated > 0


def _require(path: Optional[str], what: str) -> str:
    if not path:
        raise HarnessError(f"config missing required path: {what}")
    if not os.path.exists(path):
        raise HarnessError(f"{what} not found: {path}")
    return path


def _build_searcher(config: ExperimentConfig, store: PassageStore,
                    claim_ids: Sequence[str]):
    if config.retriever == "bm25":
        index = InvertedIndex.load(_require(config.sparse_index, "sparse_index"))
        linker = None
        if config.entity_augment:
            if not config.linker or "base_url" not in config.linker:
                raise HarnessError("entity_augment requires a linker config with base_url")
            linker = EntityLinker(LinkerConfig(**config.linker))
        return SparseSearcher(index, store, linker=linker)
    if config.retriever == "bpr":
        index = DenseIndex.load(_require(config.dense_index, "dense_index"))
        vectors = None
        if config.query_embeddings:
            vectors = query_vectors_from_embedding_file(
                _require(config.query_embeddings, "query_embeddings"), claim_ids
            )
        encoder = fid.EncoderClient(config.encode_endpoint) if config.encode_endpoint else None
        if vectors is None and encoder is None:
            raise HarnessError("bpr retrieval needs query_embeddings or encode_endpoint")
        return DenseSearcher(index, store, query_vectors=vectors, encoder=encoder,
                             n_candidates=config.n_candidates)
    raise HarnessError(f"unknown retriever {config.retriever!r}")


def _build_backend(config: ExperimentConfig, searcher):
    kind = config.backend.get("kind", "echo")
    if kind == "echo":
        return EchoBackend()
    if kind == "top1":
        return Top1Backend(searcher)
    if kind == "remote":
        endpoint = config.backend.get("endpoint")
        if not endpoint:
            raise HarnessError("remote backend requires an endpoint")
        return RemoteBackend(
            endpoint,
            max_new_tokens=config.backend.get("max_new_tokens", fid.DEFAULT_MAX_NEW_TOKENS),
            timeout=config.backend.get("timeout", 60.0),
        )
    raise HarnessError(f"unknown backend kind {kind!r}")


def _test_records(config: ExperimentConfig, seed: int) -> list[ClaimRecord]:
    path = config.test_dataset.replace("{seed}", str(seed))
    return load_records(_require(path, "test_dataset"))


def _evaluate_record(record: ClaimRecord, searcher, backend, config: ExperimentConfig,
                     emb_table) -> tuple[Optional[PredictionRow], Optional[str]]:
    """Returns (prediction, None) or (None, failed_claim_id)."""
    try:
        if config.k == 0:
            gen_input = claim_only_input(record.text, claim_id=record.claim_id,
                                         max_tokens=config.max_tokens)
        else:
            hits = searcher.retrieve(record.claim_id, record.text, config.k)
            if not hits:
                logger.warning("retrieval returned nothing for claim %s", record.claim_id)
                return None, record.claim_id
            passages = [searcher.passage_text(h.passage_id) for h in hits]
            gen_input = fid.assemble(record.text, passages, max_tokens=config.max_tokens,
                                     claim_id=record.claim_id)
        output = backend.generate(gen_input)
    except (RetrievalInputError, GenerationTransportError, FidError) as exc:
        logger.warning("record %s failed: %s", record.claim_id, exc)
        return None, record.claim_id

    pair = metrics.ScoredPair(candidate=output.explanation,
                              references=tuple(record.references))
    scores: dict = {}
    if "rouge1" in config.metrics:
        scores["rouge1"] = metrics.rouge_n(pair, n=1)[2]
    if "rougeL" in config.metrics:
        scores["rougeL"] = metrics.rouge_l(pair)[2]
    if "acc" in config.metrics and backend.kind != "top1":
        scores["correct"] = float(output.label == record.overall_label)
    if "bscore" in config.metrics and emb_table is not None:
        cand = emb_table.get(output.explanation)
        refs = [emb_table[r] for r in record.references if r in emb_table]
        if cand is not None and refs:
            scores["bscore_rs"] = metrics.bert_score_rescaled(
                cand, refs, config.bscore_baseline
            )
    label = output.label.value if hasattr(output.label, "value") else str(output.label)
    return PredictionRow(claim_id=record.claim_id, raw=output.raw, label=label,
                         explanation=output.explanation, scores=scores), None


def _mean(values: list[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def run_cell(config: ExperimentConfig) -> ExperimentCell:
    """Evaluate one experiment configuration across its seeds."""
    start = time.perf_counter()
    store = PassageStore.load(_require(config.knowledge_source, "knowledge_source"))
    seed_records = {seed: _test_records(config, seed) for seed in config.seeds}
    all_claim_ids = [r.claim_id for records in seed_records.values() for r in records]
    searcher = _build_searcher(config, store, all_claim_ids)
    backend = _build_backend(config, searcher)
    emb_table = None
    if "bscore" in config.metrics and config.token_embeddings:
        emb_table = metrics.load_token_embeddings(
            _require(config.token_embeddings, "token_embeddings"))

    per_seed: dict[str, list[float]] = {}
    failures: list[str] = []
    predictions: list[PredictionRow] = []
    evaluated = 0
    for seed in config.seeds:
        records = seed_records[seed]
        if config.parallelism > 1:
            with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
                results = list(pool.map(
                    lambda r: _evaluate_record(r, searcher, backend, config, emb_table),
                    records,
                ))
        else:
            results = [_evaluate_record(r, searcher, backend, config, emb_table)
                       for r in records]
        seed_scores: dict[str, list[float]] = {}
        for row, failed in results:
            if failed is not None:
                failures.append(failed)
                continue
            evaluated += 1
            predictions.append(row)
            for name, value in row.scores.items():
                seed_scores.setdefault(name, []).append(value)
        for name, values in seed_scores.items():
            per_seed.setdefault(name, []).append(sum(values) / len(values))

    report = metrics.EvalReport(
        b_score_rs=_mean(per_seed.get("bscore_rs", [])),
        rouge1_f=_mean(per_seed.get("rouge1", [])),
        rougeL_f=_mean(per_seed.get("rougeL", [])),
        accuracy=_mean(per_seed.get("correct", [])),
        n={"evaluated": evaluated, "failed": len(failures), "seeds": len(config.seeds)},
    )
    cell = ExperimentCell(
        config=config.to_dict(),
        report=report,
        wall_time=time.perf_counter() - start,
        failures=failures,
        evaluated=evaluated,
        predictions=predictions,
    )
    if not cell.valid:
        logger.warning("cell produced no evaluated records; marking invalid")
    return cell


def run_sweep(base_config: ExperimentConfig,
              k_values: Sequence[int] = DEFAULT_K_SWEEP) -> list[ExperimentCell]:
    """One cell per retrieval depth, ascending."""
    return [run_cell(base_config.replace(k=k)) for k in sorted(k_values)]


def compare_baselines(config: ExperimentConfig) -> list[dict]:
    """Baseline table rows: retrieval-only, full model, no-retrieval, classifier.

    Rows whose backend is not configured are emitted as unavailable instead
    of failing the comparison.
    """
    rows: list[dict] = []

    top1_cell = run_cell(config.replace(backend={"kind": "top1"}))
    rows.append(_baseline_row("top1", top1_cell))

    if config.backend.get("kind") == "remote":
        rows.append(_baseline_row("model", run_cell(config)))
        rows.append(_baseline_row("no_retrieval", run_cell(config.replace(k=0))))
    else:
        rows.append({"method": "model", "available": False})
        rows.append({"method": "no_retrieval", "available": False})

    if config.classify_endpoint:
        rows.append(_classifier_row(config))
    else:
        rows.append({"method": "classifier", "available": False})
    return rows


def _baseline_row(method: str, cell: ExperimentCell) -> dict:
    row = {"method": method, "available": True}
    row.update(cell.report.to_dict())
    row["failures"] = cell.failure_count
    return row


def _classifier_row(config: ExperimentConfig) -> dict:
    """Veracity-only baseline: classify claim + reference explanation."""
    import requests

    from .datasets import VeracityLabel

    records = _test_records(config, config.seeds[0])
    predictions, gold = [], []
    session = requests.Session()
    for record in records:
        try:
            resp = session.post(
                f"{config.classify_endpoint.rstrip('/')}/classify",
                json={"claim": record.text, "explanation": record.references[0]},
                timeout=60.0,
            )
            resp.raise_for_status()
            predictions.append(VeracityLabel(resp.json()["label"]))
        except (requests.RequestException, KeyError, ValueError):
            predictions.append(fid.UNPARSEABLE)
        gold.append(record.overall_label)
    acc = metrics.accuracy(predictions, gold)
    return {"method": "classifier", "available": True, "accuracy": acc,
            "n": {"evaluated": len(gold)}}


# ---- report emission -----------------------------------------------------------

CELL_CSV_COLUMNS = ["cell", "retriever", "k", "seeds", "evaluated", "failures",
                    "acc", "bscore_rs", "rouge1", "rougeL"]
DEPTH_CSV_COLUMNS = ["k", "acc", "bscore_rs", "rouge1", "rougeL"]


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def cells_csv(cells: Sequence[ExperimentCell]) -> str:
    lines = [",".join(CELL_CSV_COLUMNS)]
    for i, cell in enumerate(cells):
        report = cell.report
        lines.append(",".join([
            str(i),
            cell.config["retriever"],
            str(cell.config["k"]),
            str(len(cell.config["seeds"])),
            str(cell.evaluated),
            str(cell.failure_count),
            _fmt(report.accuracy),
            _fmt(report.b_score_rs),
            _fmt(report.rouge1_f),
            _fmt(report.rougeL_f),
        ]))
    return "\n".join(lines) + "\n"


def depth_curve_csv(cells: Sequence[ExperimentCell]) -> str:
    lines = [",".join(DEPTH_CSV_COLUMNS)]
    for cell in cells:
        report = cell.report
        lines.append(",".join([
            str(cell.config["k"]),
            _fmt(report.accuracy),
            _fmt(report.b_score_rs),
            _fmt(report.rouge1_f),
            _fmt(report.rougeL_f),
        ]))
    return "\n".join(lines) + "\n"


def depth_curve_svg(cells: Sequence[ExperimentCell], path) -> None:
    """Static line chart of metric means against retrieval depth."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ks = [cell.config["k"] for cell in cells]
    series = {
        "ACC": [cell.report.accuracy for cell in cells],
        "B-score (rescaled)": [cell.report.b_score_rs for cell in cells],
        "ROUGE-1": [cell.report.rouge1_f for cell in cells],
        "ROUGE-L": [cell.report.rougeL_f for cell in cells],
    }
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, values in series.items():
        if any(v is not None for v in values):
            ax.plot(ks, [float("nan") if v is None else v for v in values],
                    marker="o", label=name)
    ax.set_xlabel("retrieved passages (k)")
    ax.set_ylabel("score")
    ax.set_xticks(ks)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def write_outputs(cells: Sequence[ExperimentCell], out_dir) -> None:
    """Emit cells.csv, cells.json, depth_curve.csv/svg, predictions.jsonl."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "cells.csv"), "w", encoding="utf-8") as fh:
        fh.write(cells_csv(cells))
    with open(os.path.join(out_dir, "depth_curve.csv"), "w", encoding="utf-8") as fh:
        fh.write(depth_curve_csv(cells))
    with open(os.path.join(out_dir, "cells.json"), "w", encoding="utf-8") as fh:
        json.dump([{
            "config": cell.config,
            "report": cell.report.to_dict(),
            "wall_time": cell.wall_time,
            "failures": cell.failures,
            "evaluated": cell.evaluated,
            "valid": cell.valid,
        } for cell in cells], fh, indent=2)
    with open(os.path.join(out_dir, "predictions.jsonl"), "w", encoding="utf-8") as fh:
        for cell in cells:
            for row in cell.predictions:
                fh.write(json.dumps(row.to_dict(), ensure_ascii=False) + "\n")
    depth_curve_svg(cells, os.path.join(out_dir, "depth_curve.svg"))
