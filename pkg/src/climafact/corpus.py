"""Knowledge-source ingestion: normalization, 100-word segmentation, passage store.

Documents from a knowledge source (a Wikipedia dump, PubMed abstracts, report
collections, ...) are normalized, cut into non-overlapping 100-word passages,
and persisted in a binary record file with an offset table so a store with
tens of millions of passages can be opened lazily and read with O(1) access.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import mmap
import os
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from . import _binio

logger = logging.getLogger(__name__)

STORE_MAGIC = b"CFPS0001"

PASSAGE_WORDS = 100

# Cc control characters; the whitespace ones (\t, \n, ...) are handled by the
# whitespace collapse, the rest are dropped outright.
_CONTROL_DELETE = {
    cp: None
    for cp in list(range(0x00, 0x20)) + [0x7F] + list(range(0x80, 0xA0))
    if not chr(cp).isspace()
}


class CorpusError(Exception):
    """Raised for malformed corpus input or store files."""


class PassageNotFound(KeyError):
    """Raised when a passage id is outside the store."""


def normalize_text(raw: str) -> str:
    """Collapse whitespace runs to single spaces, strip ends, drop control chars.

    Idempotent: normalize_text(normalize_text(x)) == normalize_text(x).
    """
    return " ".join(raw.translate(_CONTROL_DELETE).split())


def count_words(text: str) -> int:
    """Number of whitespace-delimited words."""
    return len(text.split())


@dataclass
class Document:
    doc_id: str
    title: str
    body: str


@dataclass(frozen=True)
class Passage:
    passage_id: int
    doc_id: str
    title: str
    text: str
    word_count: int


def segment_document(doc: Document, start_id: int = 0) -> list[Passage]:
    """Cut a normalized document body into greedy 100-word passages.

    Chunks are taken left to right; every chunk holds exactly 100 words except
    the last, which holds the remainder. An empty body yields no passages.
    Passage ids are assigned consecutively from ``start_id``.
    """
    words = doc.body.split()
    passages = []
    for i, start in enumerate(range(0, len(words), PASSAGE_WORDS)):
        chunk = words[start:start + PASSAGE_WORDS]
        passages.append(
            Passage(
                passage_id=start_id + i,
                doc_id=doc.doc_id,
                title=doc.title,
                text=" ".join(chunk),
                word_count=len(chunk),
            )
        )
    return passages


class PassageStore:
    """Ordered, densely-indexed passage collection.

    Two backing modes: in-memory (freshly ingested) and file-backed (loaded
    from a persisted store, passages decoded on demand via the offset table).
    A store is immutable once built and safe for concurrent readers.
    """

    def __init__(self, passages: Optional[list[Passage]] = None, source_label: str = ""):
        self._passages: Optional[list[Passage]] = passages if passages is not None else []
        self.source_label = source_label
        self._mm: Optional[mmap.mmap] = None
        self._offsets = None
        self._count = len(self._passages)
        self._validate_dense_ids()

    def _validate_dense_ids(self) -> None:
        if self._passages is None:
            return
        for i, p in enumerate(self._passages):
            if p.passage_id != i:
                raise CorpusError(f"passage ids must be dense: expected {i}, got {p.passage_id}")

    def __len__(self) -> int:
        return self._count

    @property
    def count(self) -> int:
        return self._count

    def __iter__(self) -> Iterator[Passage]:
        for i in range(self._count):
            yield self.get(i)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PassageStore):
            return NotImplemented
        if self.source_label != other.source_label or len(self) != len(other):
            return False
        return all(a == b for a, b in zip(self, other))

    def get(self, passage_id: int) -> Passage:
        """Return the passage with the given dense id; O(1)."""
        if not 0 <= passage_id < self._count:
            raise PassageNotFound(f"passage id {passage_id} out of range [0, {self._count})")
        if self._passages is not None:
            return self._passages[passage_id]
        return self._decode_record(passage_id)

    def _decode_record(self, passage_id: int) -> Passage:
        mm = self._mm
        off = int(self._offsets[passage_id])
        (pid,) = struct.unpack_from("<Q", mm, off)
        off += 8
        fields = []
        for _ in range(3):  # doc_id, title, text
            (n,) = struct.unpack_from("<I", mm, off)
            off += 4
            fields.append(mm[off:off + n].decode("utf-8"))
            off += n
        doc_id, title, text = fields
        return Passage(pid, doc_id, title, text, count_words(text))

    def total_words(self) -> int:
        return sum(p.word_count for p in self)

    # ---- persistence: magic, u64 count, records, offset table, label footer

    def save(self, path: str | os.PathLike) -> None:
        """Write the store; bit-exact for identical inputs."""
        with open(path, "wb") as fh:
            fh.write(STORE_MAGIC)
            _binio.write_u64(fh, self._count)
            offsets = []
            for p in self:
                offsets.append(fh.tell())
                _binio.write_u64(fh, p.passage_id)
                _binio.write_str(fh, p.doc_id)
                _binio.write_str(fh, p.title)
                _binio.write_str(fh, p.text)
            table_pos = fh.tell()
            for off in offsets:
                _binio.write_u64(fh, off)
            _binio.write_str(fh, self.source_label)
            _binio.write_u64(fh, table_pos)

    @classmethod
    def load(cls, path: str | os.PathLike, lazy: bool = True) -> "PassageStore":
        """Open a persisted store; with ``lazy`` passages decode on access."""
        import numpy as np

        fh = open(path, "rb")
        magic = fh.read(8)
        if magic != STORE_MAGIC:
            fh.close()
            raise CorpusError(f"{path}: not a passage store (bad magic {magic!r})")
        count = _binio.read_u64(fh)
        fh.seek(-8, os.SEEK_END)
        table_pos = _binio.read_u64(fh)
        fh.seek(table_pos)
        offsets = np.frombuffer(fh.read(8 * count), dtype="<u8")
        source_label = _binio.read_str(fh)

        store = cls.__new__(cls)
        store.source_label = source_label
        store._count = count
        store._offsets = offsets
        store._mm = mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ)
        store._passages = None
        fh.close()
        if not lazy:
            store._passages = [store._decode_record(i) for i in range(count)]
            store._mm.close()
            store._mm = None
            store._offsets = None
        return store


def _decode_line(raw: bytes, line_no: int, file_offset: int) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(
            f"line {line_no}: invalid UTF-8 at byte offset {file_offset + exc.start}"
        ) from exc


def iter_documents(source: str | os.PathLike, format: str) -> Iterator[Document]:
    """Yield documents from a TSV passage dump or a JSONL document file.

    TSV follows the DPR dump convention: header row ``id\\ttext\\ttitle`` then
    one row per pre-split passage. JSONL carries one object per document with
    keys ``doc_id``, ``title``, ``body``.
    """
    if format == "tsv":
        yield from _iter_tsv(source)
    elif format == "jsonl":
        yield from _iter_jsonl(source)
    else:
        raise CorpusError(f"unknown corpus format {format!r} (expected tsv or jsonl)")


def _iter_raw_lines(source) -> Iterator[tuple[int, int, str]]:
    offset = 0
    with open(source, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            yield line_no, offset, _decode_line(raw, line_no, offset)
            offset += len(raw)


def _iter_tsv(source) -> Iterator[Document]:
    lines = _iter_raw_lines(source)
    try:
        _, _, header = next(lines)
    except StopIteration:
        raise CorpusError("empty TSV file") from None
    if [c.strip() for c in header.rstrip("\n").split("\t")] != ["id", "text", "title"]:
        raise CorpusError(f"line 1: expected TSV header 'id\\ttext\\ttitle', got {header!r}")
    for line_no, _, line in lines:
        if not line.strip():
            continue
        rows = list(csv.reader(io.StringIO(line), delimiter="\t"))
        if not rows or len(rows[0]) != 3:
            raise CorpusError(f"line {line_no}: expected 3 tab-separated columns")
        doc_id, text, title = rows[0]
        yield Document(doc_id=doc_id, title=title, body=text)


def _iter_jsonl(source) -> Iterator[Document]:
    for line_no, _, line in _iter_raw_lines(source):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
        try:
            yield Document(doc_id=str(obj["doc_id"]), title=obj.get("title", "") or "", body=obj["body"])
        except KeyError as exc:
            raise CorpusError(f"line {line_no}: missing field {exc.args[0]!r}") from None


def ingest_corpus(
    source: str | os.PathLike,
    format: str = "jsonl",
    source_label: str = "",
) -> PassageStore:
    """Build a passage store from a corpus file.

    Deterministic given input order: passage ids are assigned densely in
    ingestion order. Documents whose body normalizes to nothing are skipped
    with a warning; duplicate doc_ids are an error.
    """
    passages: list[Passage] = []
    seen_ids: set[str] = set()
    next_id = 0
    for doc in iter_documents(source, format):
        if doc.doc_id in seen_ids:
            raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
        seen_ids.add(doc.doc_id)
        body = normalize_text(doc.body)
        if not body:
            logger.warning("skipping document %r: empty body", doc.doc_id)
            continue
        doc_passages = segment_document(
            Document(doc.doc_id, normalize_text(doc.title), body), start_id=next_id
        )
        passages.extend(doc_passages)
        next_id += len(doc_passages)

    store = PassageStore(passages, source_label=source_label)
    logger.info(
        "ingested %s: %d passages, %d words (source label %r)",
        source, len(store), store.total_words(), source_label,
    )
    return store
