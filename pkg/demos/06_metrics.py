#!/usr/bin/env python3
"""Explanation, veracity, and annotator-agreement metrics."""
import numpy as np

from climafact import (AnnotationSet, ScoredPair, TokenEmbeddings, accuracy,
                       bert_score_rescaled, krippendorff_alpha,
                       manual_eval_stats, rouge_l, rouge_n, VeracityLabel)
from climafact.fid import UNPARSEABLE

# ROUGE against multiple references keeps the best-scoring reference.
pair = ScoredPair(candidate="the cat sat on mat",
                  references=("the cat is on the mat", "a dog barked"))
p, r, f1 = rouge_n(pair, n=1)
print(f"ROUGE-1  P={p:.4f} R={r:.4f} F1={f1:.4f}")
p, r, f1 = rouge_l(pair)
print(f"ROUGE-L  P={p:.4f} R={r:.4f} F1={f1:.4f}")

# The embedding score greedily matches tokens by cosine similarity, then
# rescales by a baseline b so small differences near the top spread out:
# F' = (F - b) / (1 - b).
def embeddings(tokens, seed):
    rng = np.random.default_rng(seed)
    return TokenEmbeddings.from_rows(tokens, rng.standard_normal((len(tokens), 16)))

cand = embeddings(["oceans", "acidify", "fast"], seed=1)
ref_close = TokenEmbeddings.from_rows(cand.tokens, cand.vectors.copy())
ref_far = embeddings(["unrelated", "words", "here", "now"], seed=2)
print(f"\nrescaled score vs itself:   {bert_score_rescaled(cand, [ref_close], 0.85):+.3f}")
print(f"rescaled score vs unrelated: {bert_score_rescaled(cand, [ref_far], 0.85):+.3f}")

# Label accuracy counts exact matches; an unparseable output never matches.
gold = [VeracityLabel.SUPPORTS, VeracityLabel.REFUTES, VeracityLabel.REFUTES]
predicted = [VeracityLabel.SUPPORTS, VeracityLabel.REFUTES, UNPARSEABLE]
print(f"\naccuracy: {accuracy(predicted, gold):.3f}")

# Krippendorff's alpha corrects raw agreement for chance. Two annotators,
# four items, one disagreement:
ratings = {(0, "a"): "yes", (0, "b"): "yes",
           (1, "a"): "yes", (1, "b"): "no",
           (2, "a"): "no", (2, "b"): "no",
           (3, "a"): "no", (3, "b"): "no"}
nominal = AnnotationSet(ratings, scale="nominal")
print(f"alpha (1 disagreement in 8 ratings): {krippendorff_alpha(nominal):.4f}")

# Manual evaluation reduces each item to a majority vote: mean majority rank
# (lower = better) and agreement of the majority judgment with the truth.
ranks = AnnotationSet({(i, a): rank for i, votes in enumerate([(1, 1, 2), (2, 2, 1)])
                       for a, rank in enumerate(votes)}, scale="ordinal")
judgments = AnnotationSet({(i, a): v for i, votes in enumerate([("y", "y", "n"),
                                                                ("n", "n", "n")])
                           for a, v in enumerate(votes)}, scale="nominal")
mar, v_agree = manual_eval_stats({"rank": ranks, "judgment": judgments},
                                 true_labels={0: "y", 1: "y"})
print(f"mean majority rank: {mar:.2f}   agreement with truth: {v_agree:.2f}")
