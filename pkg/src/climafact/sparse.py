"""Sparse retrieval: tokenizer, inverted index, Okapi BM25 scoring and search.

The index maps each term to a posting list sorted by passage id. Scoring uses
the ln(1 + (N - df + 0.5)/(df + 0.5)) idf variant with k1 = 1.2 and b = 0.75,
so idf stays strictly positive for every document frequency 0 <= df <= N.
Queries may optionally be augmented with linked-entity concepts (see
:mod:`climafact.linking`).
"""
from __future__ import annotations

import math
import os
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from . import _binio
from .corpus import PassageStore

INDEX_MAGIC = b"CFIX0001"

BM25_K1 = 1.2
BM25_B = 0.75

# Unicode letters and digits; underscore excluded so it splits like any
# other punctuation.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class IndexError_(Exception):
    """Raised for malformed index files or unknown passages."""


@dataclass(frozen=True)
class RetrievalHit:
    passage_id: int
    score: float
    rank: int


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters.

    No stemming, stopwords retained; empty pieces dropped.
    """
    return _TOKEN_RE.findall(text.lower())


class InvertedIndex:
    """Term -> posting list index over a passage store.

    postings[t] is a list of (passage_id, term_frequency) pairs sorted by
    ascending passage id; doc_lengths[p] is the token count of passage p.
    Immutable once built; safe for concurrent queries.
    """

    def __init__(
        self,
        postings: dict[str, list[tuple[int, int]]],
        doc_lengths: list[int],
        avgdl: Optional[float] = None,
    ):
        self.postings = postings
        self.doc_lengths = doc_lengths
        self.N = len(doc_lengths)
        self.avgdl = avgdl if avgdl is not None else sum(doc_lengths) / self.N

    @classmethod
    def build(cls, store: PassageStore) -> "InvertedIndex":
        if len(store) == 0:
            raise IndexError_("cannot index an empty passage store")
        postings: dict[str, list[tuple[int, int]]] = {}
        doc_lengths = []
        for passage in store:
            tokens = tokenize(passage.text)
            doc_lengths.append(len(tokens))
            for term, tf in Counter(tokens).items():
                postings.setdefault(term, []).append((passage.passage_id, tf))
        # store iteration is in ascending id order, so lists arrive sorted
        return cls(postings, doc_lengths)

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        df = self.df(term)
        return math.log(1.0 + (self.N - df + 0.5) / (df + 0.5))

    def _tf(self, term: str, passage_id: int) -> int:
        for pid, tf in self.postings.get(term, ()):
            if pid == passage_id:
                return tf
        return 0

    def score(self, query_terms: Sequence[str], passage_id: int,
              k1: float = BM25_K1, b: float = BM25_B) -> float:
        """BM25 score of one passage for a query term multiset."""
        if not 0 <= passage_id < self.N:
            raise IndexError_(f"passage id {passage_id} not in index")
        dl = self.doc_lengths[passage_id]
        norm = k1 * (1.0 - b + b * dl / self.avgdl)
        s = 0.0
        for term in query_terms:
            tf = self._tf(term, passage_id)
            if tf:
                s += self.idf(term) * tf * (k1 + 1.0) / (tf + norm)
        return s

    def search_terms(self, query_terms: Sequence[str], k: int,
                     k1: float = BM25_K1, b: float = BM25_B) -> list[RetrievalHit]:
        """Top-k passages by BM25 over the union of the query terms' postings.

        Scores accumulate term-at-a-time in query order, which makes the
        floating-point sums identical to a per-passage loop over the same
        query order. Ties break by ascending passage id.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        scores: dict[int, float] = {}
        for term in query_terms:
            plist = self.postings.get(term)
            if not plist:
                continue
            idf = self.idf(term)
            for pid, tf in plist:
                dl = self.doc_lengths[pid]
                norm = k1 * (1.0 - b + b * dl / self.avgdl)
                contrib = idf * tf * (k1 + 1.0) / (tf + norm)
                scores[pid] = scores.get(pid, 0.0) + contrib
        ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:k]
        return [
            RetrievalHit(passage_id=pid, score=score, rank=rank)
            for rank, (pid, score) in enumerate(ranked, start=1)
        ]

    def search(self, query_text: str, k: int, extra_terms: Iterable[str] = ()) -> list[RetrievalHit]:
        """Tokenize a query, optionally extend it, and rank the top k passages."""
        terms = tokenize(query_text) + list(extra_terms)
        if not terms:
            return []
        return self.search_terms(terms, k)

    def __eq__(self, other) -> bool:
        if not isinstance(other, InvertedIndex):
            return NotImplemented
        return (
            self.N == other.N
            and self.avgdl == other.avgdl
            and self.doc_lengths == other.doc_lengths
            and self.postings == other.postings
        )

    # ---- persistence

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "wb") as fh:
            fh.write(INDEX_MAGIC)
            _binio.write_u64(fh, self.N)
            _binio.write_f64(fh, self.avgdl)
            for dl in self.doc_lengths:
                _binio.write_u32(fh, dl)
            _binio.write_u64(fh, len(self.postings))
            for term in sorted(self.postings):
                _binio.write_str(fh, term)
                plist = self.postings[term]
                _binio.write_u64(fh, len(plist))
                for pid, tf in plist:
                    _binio.write_u64(fh, pid)
                    _binio.write_u32(fh, tf)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "InvertedIndex":
        with open(path, "rb") as fh:
            if fh.read(8) != INDEX_MAGIC:
                raise IndexError_(f"{path}: not a sparse index (bad magic)")
            n = _binio.read_u64(fh)
            avgdl = _binio.read_f64(fh)
            doc_lengths = [_binio.read_u32(fh) for _ in range(n)]
            n_terms = _binio.read_u64(fh)
            postings: dict[str, list[tuple[int, int]]] = {}
            for _ in range(n_terms):
                term = _binio.read_str(fh)
                m = _binio.read_u64(fh)
                postings[term] = [
                    (_binio.read_u64(fh), _binio.read_u32(fh)) for _ in range(m)
                ]
        return cls(postings, doc_lengths, avgdl=avgdl)


def build_index(store: PassageStore) -> InvertedIndex:
    """Build the inverted index for a passage store."""
    return InvertedIndex.build(store)
