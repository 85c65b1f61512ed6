"""Evaluation statistics for explanations, labels, retrieval, and annotators.

Explanation quality: unigram overlap (ROUGE-1), longest-common-subsequence
overlap (ROUGE-L), and greedy contextual-embedding matching rescaled by a
baseline so its useful range widens (scores below the baseline go negative).
Every text metric takes one candidate against multiple references and keeps
the best reference score. Veracity quality is plain accuracy. Manual
evaluation reduces annotator ratings to majority votes and reports
chance-corrected agreement (Krippendorff's alpha), mean majority rank, and
raw agreement with the true label.
"""
from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .sparse import RetrievalHit, tokenize


class MetricError(Exception):
    pass


@dataclass(frozen=True)
class ScoredPair:
    candidate: str
    references: tuple[str, ...]

    def __post_init__(self):
        if not self.references:
            raise MetricError("a scored pair needs at least one reference")


# ---- ROUGE ---------------------------------------------------------------------

def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _prf(overlap: float, cand_total: float, ref_total: float) -> tuple[float, float, float]:
    p = overlap / cand_total if cand_total else 0.0
    r = overlap / ref_total if ref_total else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def rouge_n(pair: ScoredPair, n: int = 1) -> tuple[float, float, float]:
    """Clipped n-gram overlap; returns (P, R, F1) of the best-F1 reference."""
    cand = tokenize(pair.candidate)
    if not cand:
        return (0.0, 0.0, 0.0)
    cand_counts = _ngrams(cand, n)
    best = (0.0, 0.0, 0.0)
    for reference in pair.references:
        ref = tokenize(reference)
        ref_counts = _ngrams(ref, n)
        overlap = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        scores = _prf(overlap, max(len(cand) - n + 1, 0), max(len(ref) - n + 1, 0))
        if scores[2] > best[2]:
            best = scores
    return best


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # single-row DP over the shorter sequence
    if len(b) > len(a):
        a, b = b, a
    row = [0] * (len(b) + 1)
    for x in a:
        prev_diag = 0
        for j, y in enumerate(b, start=1):
            prev_row = row[j]
            if x == y:
                row[j] = prev_diag + 1
            elif row[j - 1] > row[j]:
                row[j] = row[j - 1]
            prev_diag = prev_row
    return row[len(b)]


def rouge_l(pair: ScoredPair) -> tuple[float, float, float]:
    """LCS-based overlap; returns (P, R, F1) of the best-F1 reference."""
    cand = tokenize(pair.candidate)
    if not cand:
        return (0.0, 0.0, 0.0)
    best = (0.0, 0.0, 0.0)
    for reference in pair.references:
        ref = tokenize(reference)
        lcs = _lcs_length(cand, ref) if ref else 0
        scores = _prf(lcs, len(cand), len(ref))
        if scores[2] > best[2]:
            best = scores
    return best


# ---- rescaled contextual-embedding score ----------------------------------------

@dataclass
class TokenEmbeddings:
    tokens: list[str]
    vectors: np.ndarray  # (n_tokens, dim), L2-normalized on construction

    @classmethod
    def from_rows(cls, tokens: Sequence[str], vectors) -> "TokenEmbeddings":
        matrix = np.asarray(vectors, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise MetricError(
                f"need one embedding row per token: {len(tokens)} tokens, matrix {matrix.shape}"
            )
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return cls(tokens=list(tokens), vectors=matrix / norms)


def greedy_match_f1(candidate: TokenEmbeddings, reference: TokenEmbeddings) -> float:
    """Greedy-matching F over cosine similarities of two token sequences."""
    if not candidate.tokens or not reference.tokens:
        raise MetricError("token embeddings must be non-empty")
    if candidate.vectors.shape[1] != reference.vectors.shape[1]:
        raise MetricError("embedding dimensions differ")
    sim = candidate.vectors @ reference.vectors.T
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def rescale(f: float, baseline_b: float) -> float:
    """Affine rescaling (f - b) / (1 - b); order-preserving, fixes f = 1."""
    if baseline_b >= 1.0:
        raise MetricError("baseline must be < 1")
    return (f - baseline_b) / (1.0 - baseline_b)


def bert_score_rescaled(candidate_emb: TokenEmbeddings,
                        reference_embs: Sequence[TokenEmbeddings],
                        baseline_b: float) -> float:
    """Best rescaled greedy-matching F over the reference set."""
    if not reference_embs:
        raise MetricError("at least one reference embedding is required")
    return max(
        rescale(greedy_match_f1(candidate_emb, ref), baseline_b)
        for ref in reference_embs
    )


def load_token_embeddings(path) -> dict[str, TokenEmbeddings]:
    """Load a token-embedding fixture file (JSONL: text, tokens, vectors)."""
    import json

    table: dict[str, TokenEmbeddings] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            table[obj["text"]] = TokenEmbeddings.from_rows(obj["tokens"], obj["vectors"])
    return table


# ---- labels and retrieval --------------------------------------------------------

def accuracy(predictions: Sequence, gold: Sequence) -> float:
    """Fraction of exact label matches; an unparseable prediction never matches."""
    if len(predictions) != len(gold):
        raise MetricError(f"length mismatch: {len(predictions)} predictions, {len(gold)} gold")
    if not gold:
        raise MetricError("cannot compute accuracy of an empty set")
    return sum(p == g for p, g in zip(predictions, gold)) / len(gold)


def recall_at_k(hits: Sequence[Sequence[RetrievalHit]],
                gold_passage_ids: Sequence[Iterable[int]], k: int) -> float:
    """Fraction of queries with at least one gold passage in the top k."""
    if k < 1:
        raise MetricError("k must be >= 1")
    if len(hits) != len(gold_passage_ids):
        raise MetricError("one gold id set per query is required")
    if not hits:
        return 0.0
    found = 0
    for query_hits, gold in zip(hits, gold_passage_ids):
        gold = set(gold)
        top = {h.passage_id for h in query_hits[:k]}
        if top & gold:
            found += 1
    return found / len(hits)


# ---- annotator statistics ---------------------------------------------------------

@dataclass
class AnnotationSet:
    """Ratings for one task: (item, annotator) -> value, plus the scale."""
    ratings: dict[tuple[Hashable, Hashable], Hashable]
    scale: str  # "nominal" | "ordinal"

    def __post_init__(self):
        if self.scale not in ("nominal", "ordinal"):
            raise MetricError(f"unknown scale {self.scale!r}")

    def by_item(self) -> dict[Hashable, list]:
        units: dict[Hashable, list] = defaultdict(list)
        for (item, _annotator), value in sorted(self.ratings.items(), key=lambda kv: repr(kv[0])):
            units[item].append(value)
        return dict(units)


def krippendorff_alpha(annotations: AnnotationSet) -> float:
    """alpha = 1 - D_o/D_e from the coincidence matrix.

    Nominal distance is 0/1 disagreement; ordinal distance is the squared
    cumulative margin between the two values' categories. Items with fewer
    than two ratings are excluded.
    """
    units = {item: vals for item, vals in annotations.by_item().items() if len(vals) >= 2}
    if not units:
        raise MetricError("alpha undefined: no items with two or more ratings")

    coincidence: dict[tuple, float] = defaultdict(float)
    marginals: dict[Hashable, float] = defaultdict(float)
    for values in units.values():
        m = len(values)
        for i, vi in enumerate(values):
            for j, vj in enumerate(values):
                if i != j:
                    coincidence[(vi, vj)] += 1.0 / (m - 1)
    for (vi, _vj), weight in coincidence.items():
        marginals[vi] += weight
    n = sum(marginals.values())

    if annotations.scale == "ordinal":
        try:
            ordered = sorted(marginals)
        except TypeError as exc:
            raise MetricError("ordinal ratings must be mutually orderable") from exc
        position = {v: i for i, v in enumerate(ordered)}

        def delta(a, b) -> float:
            lo, hi = sorted((position[a], position[b]))
            between = sum(marginals[ordered[g]] for g in range(lo, hi + 1))
            return (between - (marginals[a] + marginals[b]) / 2.0) ** 2
    else:
        def delta(a, b) -> float:
            return 0.0 if a == b else 1.0

    d_o = sum(w * delta(a, b) for (a, b), w in coincidence.items()) / n
    d_e = sum(
        marginals[a] * marginals[b] * delta(a, b)
        for a in marginals for b in marginals
    ) / (n * (n - 1))
    if d_e == 0.0:
        return 1.0  # a single rating value everywhere: perfect agreement
    return 1.0 - d_o / d_e


def majority_vote(values: Sequence) -> Optional[Hashable]:
    """Unique plurality value, or None when tied."""
    counts = Counter(values)
    best = max(counts.values())
    leaders = [v for v, c in counts.items() if c == best]
    return leaders[0] if len(leaders) == 1 else None


def manual_eval_stats(annotations: Mapping[str, AnnotationSet],
                      true_labels: Optional[Mapping[Hashable, Hashable]] = None,
                      judgment_task: str = "judgment",
                      rank_task: str = "rank") -> tuple[Optional[float], Optional[float]]:
    """Majority-vote manual-evaluation statistics: (mean rank, label agreement).

    The mean average rank comes from the ordinal task's per-item majority
    ranks (lower is better). Agreement is the fraction of items whose
    majority judgment equals the item's true label. Items whose vote ties
    are skipped with a warning. Either statistic is None when its task (or
    the true labels) is missing.
    """
    import logging

    logger = logging.getLogger(__name__)
    mar = v_agree = None

    ranks = annotations.get(rank_task)
    if ranks is not None:
        votes = []
        for item, values in ranks.by_item().items():
            vote = majority_vote(values)
            if vote is None:
                logger.warning("unresolvable rank tie on item %r; skipped", item)
                continue
            votes.append(float(vote))
        if votes:
            mar = sum(votes) / len(votes)

    judgments = annotations.get(judgment_task)
    if judgments is not None and true_labels is not None:
        agreements = []
        for item, values in judgments.by_item().items():
            if item not in true_labels:
                continue
            vote = majority_vote(values)
            if vote is None:
                logger.warning("unresolvable judgment tie on item %r; skipped", item)
                continue
            agreements.append(vote == true_labels[item])
        if agreements:
            v_agree = sum(agreements) / len(agreements)

    return mar, v_agree


def load_annotations(path, scales: Optional[Mapping[str, str]] = None) -> dict[str, AnnotationSet]:
    """Read annotation CSV (item_id, annotator_id, task, value) into task sets.

    Scales default per task to ordinal when every value parses as a number,
    nominal otherwise; pass ``scales`` to override.
    """
    rows_by_task: dict[str, dict[tuple, Hashable]] = defaultdict(dict)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"item_id", "annotator_id", "task", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise MetricError(f"annotation CSV must have columns {sorted(required)}")
        for row in reader:
            rows_by_task[row["task"]][(row["item_id"], row["annotator_id"])] = row["value"]

    out: dict[str, AnnotationSet] = {}
    for task, ratings in rows_by_task.items():
        scale = (scales or {}).get(task)
        numeric: Optional[dict] = {}
        for key, value in ratings.items():
            try:
                numeric[key] = float(value)
            except ValueError:
                numeric = None
                break
        if scale is None:
            scale = "ordinal" if numeric is not None else "nominal"
        out[task] = AnnotationSet(
            ratings=numeric if (scale == "ordinal" and numeric is not None) else ratings,
            scale=scale,
        )
    return out


# ---- aggregate report ---------------------------------------------------------------

@dataclass
class EvalReport:
    """Per-metric arithmetic means over the evaluated records."""
    b_score_rs: Optional[float] = None
    rouge1_f: Optional[float] = None
    rougeL_f: Optional[float] = None
    accuracy: Optional[float] = None
    recall_at_k: Optional[float] = None
    alpha: Optional[float] = None
    mar: Optional[float] = None
    v_agree: Optional[float] = None
    n: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            name: value
            for name, value in vars(self).items()
            if name != "n" and value is not None
        }
        out["n"] = dict(self.n)
        return out
