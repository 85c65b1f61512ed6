#!/usr/bin/env python3
"""End-to-end experiment cells: retrieve -> assemble -> generate -> score,
swept over retrieval depth, with CSV/JSON/SVG reports."""
import random
import tempfile
from pathlib import Path

from climafact import ExperimentConfig, run_sweep
from climafact.corpus import Document, PassageStore, segment_document
from climafact.datasets import (ClaimRecord, EvidenceSentence, VeracityLabel,
                                save_records)
from climafact.harness import write_outputs
from climafact.sparse import build_index

workdir = Path(tempfile.mkdtemp(prefix="climafact_sweep_"))
rng = random.Random(1)
words = ["ocean", "acid", "carbon", "warming", "ice", "model", "trend",
         "reef", "solar", "cycle", "sea", "level"]

# Materialize the artifacts a cell needs: a passage store, a sparse index,
# and a test dataset of claims with reference explanations.
passages = []
for i in range(80):
    text = " ".join(rng.choice(words) for _ in range(rng.randint(8, 30)))
    passages.extend(segment_document(Document(f"d{i}", "", text), start_id=len(passages)))
store = PassageStore(passages, source_label="demo")
store_path = workdir / "store.cfps"
store.save(store_path)
index_path = workdir / "index.cfix"
build_index(store).save(index_path)

records = []
for i in range(10):
    refs = [" ".join(rng.choice(words) for _ in range(12))]
    records.append(ClaimRecord(
        claim_id=str(i),
        text=" ".join(rng.choice(words) for _ in range(6)),
        evidence=[EvidenceSentence(refs[0], VeracityLabel.REFUTES)],
        overall_label=VeracityLabel.REFUTES,
        references=refs,
    ))
dataset_path = workdir / "test.jsonl"
save_records(records, dataset_path)

# The echo backend makes the run hermetic (it replays the first context);
# swap in {"kind": "remote", "endpoint": ...} to drive a live generator.
config = ExperimentConfig(
    knowledge_source=str(store_path),
    retriever="bm25",
    sparse_index=str(index_path),
    k=1,
    test_dataset=str(dataset_path),
    backend={"kind": "echo"},
    seeds=[0],
)

cells = run_sweep(config, k_values=[1, 5, 10])
for cell in cells:
    print(f"k={cell.config['k']:2d}  evaluated={cell.evaluated}  "
          f"failures={cell.failure_count}  rouge1={cell.report.rouge1_f:.4f}")

out_dir = workdir / "results"
write_outputs(cells, out_dir)
print(f"\nreports in {out_dir}:")
for path in sorted(out_dir.iterdir()):
    print(f"  {path.name}  ({path.stat().st_size} bytes)")
print("\ndepth_curve.csv:")
print((out_dir / "depth_curve.csv").read_text())
