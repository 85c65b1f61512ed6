#!/usr/bin/env python3
"""The generator wire protocol: context assembly and joint output parsing."""
from climafact import (EchoBackend, Top1Backend, VeracityLabel, assemble,
                       build_index, format_output, parse_output)
from climafact.corpus import Document, PassageStore, segment_document
from climafact.retrievers import SparseSearcher

# Every retrieved passage becomes one context: a task prefix, the claim, and
# the passage, each independently capped at 200 whitespace tokens (passage
# truncated from the right, never the claim).
fid_input = assemble(
    "our emissions cannot possibly acidify the oceans",
    ["marine life is affected by falling ocean pH", "unrelated passage text"],
    claim_id="demo-1",
)
for ctx in fid_input.contexts:
    print(repr(ctx))

# The generator answers with `LABEL; explanation`. Parsing splits at the
# first semicolon; unknown labels or missing semicolons fall back to
# UNPARSEABLE with the raw text kept as the explanation.
for raw in ("REFUTES; Oceans are acidifying.",
            "supports;x;y",
            "no label here"):
    out = parse_output(raw)
    label = out.label.value if hasattr(out.label, "value") else out.label
    print(f"{raw!r:40s} -> ({label}, {out.explanation!r})")

# format_output is the exact inverse for canonical outputs.
round_trip = parse_output(format_output(VeracityLabel.SUPPORTS, "pH is falling"))
print("round trip:", round_trip.label.value, "/", round_trip.explanation)

# Backends share one interface. The echo stub replays its first context; the
# top-1 baseline answers with the best-ranked passage verbatim (no label).
texts = ["ocean acidification stresses reefs", "solar cycles are weak", "ice melts"]
passages = []
for i, text in enumerate(texts):
    passages.extend(segment_document(Document(f"d{i}", "", text), start_id=len(passages)))
store = PassageStore(passages)
searcher = SparseSearcher(build_index(store), store)

echo_out = EchoBackend().generate(fid_input)
print("\necho raw == first context:", echo_out.raw == fid_input.contexts[0])

# no stemming: the claim must share surface forms with the passage
top1_out = Top1Backend(searcher).generate(
    assemble("ocean acidification is harmless", ["ignored"], claim_id="demo-2"))
print("top-1 explanation:", repr(top1_out.explanation))
