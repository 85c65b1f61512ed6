#!/usr/bin/env python3
"""Ingest a small document collection and look at the resulting passage store."""
import json
import tempfile
from pathlib import Path

from climafact import PassageStore, ingest_corpus, normalize_text

workdir = Path(tempfile.mkdtemp(prefix="climafact_demo_"))

# A knowledge source arrives as JSONL, one document per line. Bodies can be
# messy: whitespace runs and control characters are normalized away before
# segmentation.
docs = [
    {"doc_id": "ipcc-1", "title": "Observed warming",
     "body": "Observed  warming over\nthe past century is unequivocal. " * 40},
    {"doc_id": "pubmed-9", "title": "Ocean pH",
     "body": "Dissolved carbon dioxide lowers ocean pH, stressing calcifying organisms."},
    {"doc_id": "stub", "title": "Empty", "body": "   "},  # skipped with a warning
]
corpus_path = workdir / "docs.jsonl"
corpus_path.write_text("\n".join(json.dumps(d) for d in docs))

print("normalize_text('a  b\\n c') ->", repr(normalize_text("a  b\n c")))

# Each document is cut into non-overlapping 100-word passages (the final
# chunk keeps the remainder). Passage ids are dense, in ingestion order.
store = ingest_corpus(corpus_path, format="jsonl", source_label="Pubs")
print(f"\n{len(store)} passages, {store.total_words()} words total")
for passage in store:
    print(f"  id={passage.passage_id} doc={passage.doc_id!r} words={passage.word_count}")

# Word conservation: a document's passages tile its normalized body exactly.
first_doc = [p for p in store if p.doc_id == "ipcc-1"]
reassembled = " ".join(p.text for p in first_doc)
assert reassembled == normalize_text(docs[0]["body"])
print("\nword conservation holds for ipcc-1")

# Stores persist to a binary record file with an offset table, so passages in
# a 21M-row store load lazily with O(1) access.
store_path = workdir / "store.cfps"
store.save(store_path)
reloaded = PassageStore.load(store_path)
print(f"reloaded store == original: {reloaded == store}")
print(f"random access: passage 3 starts {reloaded.get(3).text.split()[0]!r}")
