"""Searcher facades tying an index, a passage store, and claim-side inputs.

Both searchers expose the same two calls (retrieve, passage_text) so the
generation backends and the experiment harness can stay retriever-agnostic.
"""
from __future__ import annotations

import logging
from typing import Mapping, Optional, Sequence

import numpy as np

from .corpus import PassageStore
from .dense import DenseIndex, search_dense
from .linking import EntityLinker, concept_terms
from .sparse import InvertedIndex, RetrievalHit, tokenize

logger = logging.getLogger(__name__)


class RetrievalInputError(Exception):
    pass


class SparseSearcher:
    """BM25 search over an inverted index, optionally entity-augmented."""

    def __init__(self, index: InvertedIndex, store: PassageStore,
                 linker: Optional[EntityLinker] = None):
        self.index = index
        self.store = store
        self.linker = linker

    def retrieve(self, claim_id: str, claim_text: str, k: int) -> list[RetrievalHit]:
        extra: list[str] = []
        if self.linker is not None:
            extra = concept_terms(self.linker.link(claim_text))
        return self.index.search(claim_text, k, extra_terms=extra)

    def passage_text(self, passage_id: int) -> str:
        return self.store.get(passage_id).text


class DenseSearcher:
    """Two-stage binary-code search; claim vectors come from a precomputed
    mapping (embedding file) or a remote encoder."""

    def __init__(self, index: DenseIndex, store: PassageStore,
                 query_vectors: Optional[Mapping[str, np.ndarray]] = None,
                 encoder=None, n_candidates: Optional[int] = None):
        self.index = index
        self.store = store
        self.query_vectors = query_vectors
        self.encoder = encoder
        self.n_candidates = n_candidates

    def _vector_for(self, claim_id: str, claim_text: str) -> np.ndarray:
        if self.query_vectors is not None and claim_id in self.query_vectors:
            return np.asarray(self.query_vectors[claim_id], dtype=np.float64)
        if self.encoder is not None:
            return self.encoder.encode([claim_text])[0].astype(np.float64)
        raise RetrievalInputError(
            f"no query vector for claim {claim_id!r}; provide a query embedding "
            f"file or an encoder endpoint"
        )

    def retrieve(self, claim_id: str, claim_text: str, k: int) -> list[RetrievalHit]:
        vec = self._vector_for(claim_id, claim_text)
        n = self.n_candidates if self.n_candidates is not None else max(100, 10 * k)
        return search_dense(self.index, vec, k, n_candidates=max(n, k))

    def passage_text(self, passage_id: int) -> str:
        return self.store.get(passage_id).text


def query_vectors_from_embedding_file(path, claim_ids: Sequence[str]) -> dict[str, np.ndarray]:
    """Map string claim ids onto rows of an embedding file.

    The binary embedding format keys records by unsigned integers, so claim
    ids must be integer-convertible to use file-based query vectors; anything
    else needs the encoder endpoint instead.
    """
    from .dense import load_embedding_matrix

    ids, vectors = load_embedding_matrix(path)
    by_int = {int(i): vectors[row] for row, i in enumerate(ids)}
    out: dict[str, np.ndarray] = {}
    for claim_id in claim_ids:
        try:
            key = int(claim_id)
        except ValueError:
            raise RetrievalInputError(
                f"claim id {claim_id!r} is not integer-convertible; file-based "
                f"query vectors cannot address it"
            ) from None
        if key in by_int:
            out[claim_id] = by_int[key]
    return out
