"""Dense retrieval over sign-binarized embeddings.

Precomputed passage embeddings are binarized with a sign threshold (component
>= 0 sets the bit) and packed into 64-bit words. Search runs in two stages:
candidate generation by Hamming distance over the packed codes, then
reranking candidates by the inner product between the continuous query vector
and the candidate code expanded bitwise to +/-1. With the candidate stage
spanning the whole index the two-stage result equals exhaustive reranking.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from . import _binio
from .corpus import PassageStore
from .sparse import RetrievalHit

EMBEDDING_MAGIC = b"PSGEMB01"
DENSE_INDEX_MAGIC = b"CFDX0001"


class DenseIndexError(Exception):
    """Raised for malformed embedding/index files or bad lookups."""


if hasattr(np, "bitwise_count"):
    def _popcount_rows(words: np.ndarray) -> np.ndarray:
        return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)
else:  # numpy < 2.0
    _POP_LUT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)

    def _popcount_rows(words: np.ndarray) -> np.ndarray:
        as_bytes = words.view(np.uint8).reshape(words.shape[0], -1)
        return _POP_LUT[as_bytes].sum(axis=-1, dtype=np.int64)


def _n_words(dim: int) -> int:
    return (dim + 63) // 64


_BIT_WEIGHTS = (np.uint64(1) << np.arange(64, dtype=np.uint64))


def pack_signs(vectors: np.ndarray) -> np.ndarray:
    """Pack sign bits of (n, dim) vectors into (n, n_words) uint64 words.

    Bit i of a row lives in word i >> 6 at position i & 63 (LSB first);
    component >= 0 maps to bit 1, so an exact 0 sets the bit.
    """
    vectors = np.atleast_2d(vectors)
    n, dim = vectors.shape
    nwords = _n_words(dim)
    bits = np.zeros((n, nwords * 64), dtype=np.uint64)
    bits[:, :dim] = (vectors >= 0)
    return (bits.reshape(n, nwords, 64) * _BIT_WEIGHTS).sum(axis=2, dtype=np.uint64)


def unpack_bits(words: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of pack_signs: (n, n_words) words -> (n, dim) 0/1 array."""
    words = np.atleast_2d(words)
    n = words.shape[0]
    bits = (words[:, :, None] >> np.arange(64, dtype=np.uint64)) & np.uint64(1)
    return bits.reshape(n, -1)[:, :dim].astype(np.int8)


@dataclass(frozen=True)
class BinaryCode:
    dim: int
    bits: np.ndarray  # (n_words,) uint64

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryCode):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.bits, other.bits)


def binarize(vector: Sequence[float] | np.ndarray, dim: Optional[int] = None) -> BinaryCode:
    """Sign-threshold a vector at 0 into a packed binary code (0 maps to 1)."""
    vec = np.asarray(vector, dtype=np.float64)
    if vec.ndim != 1:
        raise DenseIndexError(f"expected a 1-d vector, got shape {vec.shape}")
    if dim is not None and vec.shape[0] != dim:
        raise DenseIndexError(f"dimension mismatch: expected {dim}, got {vec.shape[0]}")
    return BinaryCode(dim=vec.shape[0], bits=pack_signs(vec)[0])


def hamming_distance(a: BinaryCode, b: BinaryCode) -> int:
    """Population count of the XOR of two equal-dimension codes."""
    if a.dim != b.dim:
        raise DenseIndexError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return int(_popcount_rows((a.bits ^ b.bits)[None, :])[0])


class DenseIndex:
    """Packed binary codes (and optionally the continuous vectors) by passage id."""

    def __init__(self, dim: int, passage_ids: np.ndarray, codes: np.ndarray,
                 vectors: Optional[np.ndarray] = None):
        order = np.argsort(passage_ids, kind="stable")
        self.dim = dim
        self.passage_ids = np.asarray(passage_ids, dtype=np.uint64)[order]
        self.codes = np.asarray(codes, dtype=np.uint64)[order]
        self.vectors = None if vectors is None else np.asarray(vectors, dtype=np.float32)[order]
        if self.codes.shape != (len(self.passage_ids), _n_words(dim)):
            raise DenseIndexError("codes shape inconsistent with dim/passage count")

    def __len__(self) -> int:
        return len(self.passage_ids)

    def rows_for(self, passage_ids: Sequence[int]) -> np.ndarray:
        """Row positions of the given passage ids; error if any is absent."""
        wanted = np.asarray(passage_ids, dtype=np.uint64)
        rows = np.searchsorted(self.passage_ids, wanted)
        bad = (rows >= len(self)) | (self.passage_ids[np.minimum(rows, len(self) - 1)] != wanted)
        if bad.any():
            missing = wanted[bad][0]
            raise DenseIndexError(f"passage id {int(missing)} not in dense index")
        return rows

    def code_for(self, passage_id: int) -> BinaryCode:
        row = self.rows_for([passage_id])[0]
        return BinaryCode(dim=self.dim, bits=self.codes[row])

    # ---- persistence

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "wb") as fh:
            fh.write(DENSE_INDEX_MAGIC)
            _binio.write_u32(fh, self.dim)
            _binio.write_u64(fh, len(self))
            fh.write(b"\x01" if self.vectors is not None else b"\x00")
            fh.write(self.passage_ids.astype("<u8").tobytes())
            fh.write(self.codes.astype("<u8").tobytes())
            if self.vectors is not None:
                fh.write(self.vectors.astype("<f4").tobytes())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "DenseIndex":
        with open(path, "rb") as fh:
            if fh.read(8) != DENSE_INDEX_MAGIC:
                raise DenseIndexError(f"{path}: not a dense index (bad magic)")
            dim = _binio.read_u32(fh)
            count = _binio.read_u64(fh)
            has_vectors = _binio.read_exact(fh, 1) == b"\x01"
            pids = np.frombuffer(_binio.read_exact(fh, 8 * count), dtype="<u8")
            nwords = _n_words(dim)
            codes = np.frombuffer(
                _binio.read_exact(fh, 8 * count * nwords), dtype="<u8"
            ).reshape(count, nwords)
            vectors = None
            if has_vectors:
                vectors = np.frombuffer(
                    _binio.read_exact(fh, 4 * count * dim), dtype="<f4"
                ).reshape(count, dim)
        return cls(dim, pids.astype(np.uint64), codes.astype(np.uint64), vectors)


def candidates(index: DenseIndex, query_code: BinaryCode, n: int) -> list[int]:
    """Passage ids of the n codes nearest the query in Hamming distance.

    Ordered by (distance, passage id); asking for more than the index holds
    returns everything, ranked.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if query_code.dim != index.dim:
        raise DenseIndexError(f"dimension mismatch: {query_code.dim} vs {index.dim}")
    dists = _popcount_rows(index.codes ^ query_code.bits)
    if n >= len(index):
        sel = np.arange(len(index))
    else:
        kth = np.partition(dists, n - 1)[n - 1]
        below = np.flatnonzero(dists < kth)
        # rows are in ascending-id order, so the first ties are the lowest ids
        ties = np.flatnonzero(dists == kth)[: n - below.size]
        sel = np.concatenate([below, ties])
    order = np.lexsort((index.passage_ids[sel], dists[sel]))
    return [int(pid) for pid in index.passage_ids[sel][order]]


def rerank(query_vector: np.ndarray, candidate_ids: Sequence[int],
           index: DenseIndex, k: int) -> list[RetrievalHit]:
    """Top-k candidates by inner product with the +/-1 expansion of their codes.

    A set bit contributes +q_i, a clear bit -q_i. Ties break by ascending
    passage id.
    """
    query = np.asarray(query_vector, dtype=np.float64)
    if query.shape != (index.dim,):
        raise DenseIndexError(f"query vector must have dim {index.dim}, got {query.shape}")
    if k > len(candidate_ids):
        raise ValueError(f"k={k} exceeds candidate count {len(candidate_ids)}")
    rows = index.rows_for(candidate_ids)
    signs = unpack_bits(index.codes[rows], index.dim).astype(np.float64) * 2.0 - 1.0
    scores = signs @ query
    pids = np.asarray(candidate_ids, dtype=np.uint64)
    order = np.lexsort((pids, -scores))[:k]
    return [
        RetrievalHit(passage_id=int(pids[i]), score=float(scores[i]), rank=rank)
        for rank, i in enumerate(order, start=1)
    ]


def search_dense(index: DenseIndex, query_vector: np.ndarray, k: int,
                 n_candidates: Optional[int] = None) -> list[RetrievalHit]:
    """Two-stage search: Hamming candidates, then inner-product rerank.

    Default candidate depth is max(100, 10k); with n_candidates >= index size
    the result equals exhaustive reranking.
    """
    if n_candidates is None:
        n_candidates = max(100, 10 * k)
    if k > n_candidates:
        raise ValueError(f"k={k} exceeds n_candidates={n_candidates}")
    cand = candidates(index, binarize(query_vector, dim=index.dim), n_candidates)
    return rerank(query_vector, cand, index, min(k, len(cand)))


# ---- embedding file I/O (magic, u32 dim, u64 count, then per-record
#      u64 passage_id + dim little-endian float32)

def write_embeddings(path: str | os.PathLike, passage_ids: Sequence[int],
                     vectors: np.ndarray) -> None:
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or len(passage_ids) != vectors.shape[0]:
        raise DenseIndexError("vectors must be (n, dim) with one row per passage id")
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        _binio.write_u32(fh, vectors.shape[1])
        _binio.write_u64(fh, vectors.shape[0])
        for pid, vec in zip(passage_ids, vectors):
            _binio.write_u64(fh, int(pid))
            fh.write(vec.astype("<f4").tobytes())


def read_embeddings(path: str | os.PathLike,
                    chunk_rows: int = 8192) -> tuple[int, Iterator[tuple[np.ndarray, np.ndarray]]]:
    """Open an embedding file; returns (dim, iterator of (ids, vectors) chunks)."""
    fh = open(path, "rb")
    if fh.read(8) != EMBEDDING_MAGIC:
        fh.close()
        raise DenseIndexError(f"{path}: not an embedding file (bad magic)")
    dim = _binio.read_u32(fh)
    count = _binio.read_u64(fh)
    record_dtype = np.dtype([("pid", "<u8"), ("vec", "<f4", (dim,))])

    def chunks() -> Iterator[tuple[np.ndarray, np.ndarray]]:
        remaining = count
        try:
            while remaining:
                take = min(chunk_rows, remaining)
                raw = _binio.read_exact(fh, record_dtype.itemsize * take)
                records = np.frombuffer(raw, dtype=record_dtype)
                yield records["pid"].astype(np.uint64), records["vec"].astype(np.float32)
                remaining -= take
        finally:
            fh.close()

    return dim, chunks()


def load_embedding_matrix(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Read a whole embedding file into (ids, vectors) arrays."""
    dim, chunks = read_embeddings(path)
    ids, vecs = [], []
    for chunk_ids, chunk_vecs in chunks:
        ids.append(chunk_ids)
        vecs.append(chunk_vecs)
    if not ids:
        return np.empty(0, dtype=np.uint64), np.empty((0, dim), dtype=np.float32)
    return np.concatenate(ids), np.concatenate(vecs)


def build_dense_index(store: PassageStore, embedding_path: str | os.PathLike,
                      keep_vectors: bool = False) -> DenseIndex:
    """Binarize an embedding file into a dense index, validating ids against the store."""
    dim, chunks = read_embeddings(embedding_path)
    all_ids, all_codes, all_vecs = [], [], []
    for ids, vecs in chunks:
        if ids.size and int(ids.max()) >= len(store):
            raise DenseIndexError(
                f"embedding passage id {int(ids.max())} not present in store of {len(store)}"
            )
        all_ids.append(ids)
        all_codes.append(pack_signs(vecs))
        if keep_vectors:
            all_vecs.append(vecs)
    if not all_ids or sum(a.size for a in all_ids) == 0:
        raise DenseIndexError(f"{embedding_path}: no embeddings")
    ids = np.concatenate(all_ids)
    if len(np.unique(ids)) != len(ids):
        raise DenseIndexError("duplicate passage ids in embedding file")
    return DenseIndex(
        dim,
        ids,
        np.concatenate(all_codes),
        np.concatenate(all_vecs) if keep_vectors else None,
    )
