#!/usr/bin/env python3
"""Derive 2-way/3-way claim datasets and seeded splits from labelled evidence."""
from climafact import VeracityLabel, aggregate_label, build_fev, stratified_split
from climafact.datasets import EvidenceSentence, SourceClaim

S, R, N = VeracityLabel.SUPPORTS, VeracityLabel.REFUTES, VeracityLabel.NOT_ENOUGH_INFO

# A claim's overall label is a plurality vote over its evidence labels;
# ties fall back to NOT_ENOUGH_INFO.
print("vote [S,S,S,R,N] ->", aggregate_label([S, S, S, R, N]).value)
print("vote [S,S,R,R,N] ->", aggregate_label([S, S, R, R, N]).value)

def claim(cid, label_seq, source_label=None):
    return SourceClaim(
        claim_id=cid, text=f"claim {cid}", source_label=source_label,
        evidence=[EvidenceSentence(f"evidence {cid}.{i}", lab)
                  for i, lab in enumerate(label_seq)],
    )

raw = [
    claim("0", [S, S, S, R, N]),            # aggregate S
    claim("1", [R, R, R, N, N]),            # aggregate R
    claim("2", [N, N, N, S, R]),            # aggregate N -> dropped by the 2-way set
    claim("3", [S, S, R, R, N]),            # tie -> N, only N-labelled refs survive
    claim("4", [S, S, S, S, S], "DISPUTED"),  # natively disputed -> excluded
]

for mode in ("fev2", "fev3"):
    records, report = build_fev(raw, mode)
    print(f"\n{mode}: kept {report.claims_kept} claims, {report.pairs_kept} pairs "
          f"(dropped: {report.dropped_label} label, {report.dropped_disputed} disputed, "
          f"{report.dropped_no_references} no refs)")
    for record in records:
        # every surviving reference agrees with the claim's overall label
        print(f"  {record.claim_id}: {record.overall_label.value:16s} "
              f"refs={len(record.references)}")

# Stratified splits keep per-label proportions within one record and are
# seed-deterministic.
records, _ = build_fev(raw * 30, "fev3")  # replicate for a worthwhile split
split = stratified_split(records, (0.7, 0.1, 0.2), seed=13)
print(f"\nsplit sizes: train={len(split.train)} "
      f"validation={len(split.validation)} test={len(split.test)}")
again = stratified_split(records, (0.7, 0.1, 0.2), seed=13)
print("same seed reproduces the split:",
      [r.claim_id for r in split.train] == [r.claim_id for r in again.train])
