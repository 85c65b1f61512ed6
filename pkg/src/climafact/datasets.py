"""Claim/explanation dataset construction.

Two families of paired data feed the pipeline:

* 2-way and 3-way derivations of a claim-verification corpus whose claims
  carry several individually-labelled evidence sentences. The claim label is
  a plurality vote over the evidence labels, evidence disagreeing with that
  vote is dropped from the reference set, and the result is split with
  per-label stratification.
* Expert-review claim/explanation pairs, one unique explanation per claim,
  split repeatedly at fixed sizes and averaged downstream. Heavily skewed
  toward refutations, so it is used for generation, not veracity training.
"""
from __future__ import annotations

import json
import logging
import math
import os
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

logger = logging.getLogger(__name__)


class DatasetError(Exception):
    """Raised for malformed dataset files or invalid split parameters."""


class VeracityLabel(str, Enum):
    SUPPORTS = "SUPPORTS"
    REFUTES = "REFUTES"
    NOT_ENOUGH_INFO = "NOT_ENOUGH_INFO"


_LABEL_ALIASES = {
    "SUPPORTS": VeracityLabel.SUPPORTS,
    "SUPPORTED": VeracityLabel.SUPPORTS,
    "REFUTES": VeracityLabel.REFUTES,
    "REFUTED": VeracityLabel.REFUTES,
    "NOT_ENOUGH_INFO": VeracityLabel.NOT_ENOUGH_INFO,
    "NOT ENOUGH INFO": VeracityLabel.NOT_ENOUGH_INFO,
    "NEI": VeracityLabel.NOT_ENOUGH_INFO,
}

# Review verdicts used by expert fact-check sites, folded onto the 3-way scheme.
_VERDICT_ALIASES = {
    "INCORRECT": VeracityLabel.REFUTES,
    "PARTIALLY INCORRECT": VeracityLabel.REFUTES,
    "MOSTLY INACCURATE": VeracityLabel.REFUTES,
    "INACCURATE": VeracityLabel.REFUTES,
    "MISLEADING": VeracityLabel.REFUTES,
    "FLAWED REASONING": VeracityLabel.REFUTES,
    "UNSUPPORTED": VeracityLabel.REFUTES,
    "IMPRECISE": VeracityLabel.NOT_ENOUGH_INFO,
    "CORRECT": VeracityLabel.SUPPORTS,
    "ACCURATE": VeracityLabel.SUPPORTS,
    "MOSTLY ACCURATE": VeracityLabel.SUPPORTS,
    "MOSTLY CORRECT": VeracityLabel.SUPPORTS,
}


def parse_label(value: str) -> VeracityLabel:
    key = value.strip().upper().replace("-", " ")
    canonical = _LABEL_ALIASES.get(key.replace(" ", "_"), None) or _LABEL_ALIASES.get(key)
    if canonical is None:
        canonical = _VERDICT_ALIASES.get(key)
    if canonical is None:
        raise DatasetError(f"unknown veracity label {value!r}")
    return canonical


@dataclass(frozen=True)
class EvidenceSentence:
    text: str
    label: VeracityLabel


@dataclass
class ClaimRecord:
    claim_id: str
    text: str
    evidence: list[EvidenceSentence]
    overall_label: VeracityLabel
    references: list[str]


@dataclass
class DatasetSplit:
    train: list[ClaimRecord]
    validation: list[ClaimRecord]
    test: list[ClaimRecord]
    seed: int

    def parts(self) -> dict[str, list[ClaimRecord]]:
        return {"train": self.train, "validation": self.validation, "test": self.test}


def aggregate_label(evidence_labels: Sequence[VeracityLabel]) -> VeracityLabel:
    """Plurality label over the evidence; ties resolve to NOT_ENOUGH_INFO."""
    if not evidence_labels:
        raise DatasetError("cannot aggregate an empty label sequence")
    counts = Counter(evidence_labels)
    best = max(counts.values())
    leaders = [label for label, c in counts.items() if c == best]
    if len(leaders) > 1:
        return VeracityLabel.NOT_ENOUGH_INFO
    return leaders[0]


# ---- 2-way / 3-way derivation ------------------------------------------------

@dataclass
class SourceClaim:
    """One raw record from the claim-verification corpus."""
    claim_id: str
    text: str
    source_label: Optional[str]
    evidence: list[EvidenceSentence]


def load_claim_corpus(path: str | os.PathLike) -> list[SourceClaim]:
    """Read the published claim/evidence JSONL (claim_id, claim, claim_label,
    evidences[*].evidence, evidences[*].evidence_label)."""
    claims = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                evidence = [
                    EvidenceSentence(text=e["evidence"], label=parse_label(e["evidence_label"]))
                    for e in obj["evidences"]
                ]
                claims.append(
                    SourceClaim(
                        claim_id=str(obj["claim_id"]),
                        text=obj["claim"],
                        source_label=obj.get("claim_label"),
                        evidence=evidence,
                    )
                )
            except (KeyError, json.JSONDecodeError, DatasetError) as exc:
                raise DatasetError(f"{path}: line {line_no}: {exc}") from exc
    return claims


@dataclass
class BuildReport:
    """What the derivation kept and dropped, with reference totals when known."""
    mode: str
    claims_in: int
    claims_kept: int
    pairs_kept: int
    dropped_disputed: int
    dropped_label: int
    dropped_no_references: int
    expected_claims: Optional[int] = None
    expected_pairs: Optional[int] = None

    def deltas(self) -> dict:
        out = {
            "mode": self.mode,
            "claims_in": self.claims_in,
            "claims_kept": self.claims_kept,
            "pairs_kept": self.pairs_kept,
            "dropped_disputed": self.dropped_disputed,
            "dropped_label": self.dropped_label,
            "dropped_no_references": self.dropped_no_references,
        }
        if self.expected_claims:
            out["expected_claims"] = self.expected_claims
            out["claims_delta_pct"] = 100.0 * (self.claims_kept - self.expected_claims) / self.expected_claims
        if self.expected_pairs:
            out["expected_pairs"] = self.expected_pairs
            out["pairs_delta_pct"] = 100.0 * (self.pairs_kept - self.expected_pairs) / self.expected_pairs
        return out


# Reference totals for the 2-way/3-way derivations of the public corpus:
# (claims, claim-evidence pairs). Our filtering decisions are documented
# stand-ins where the original derivation is underspecified, so builds report
# deltas against these instead of forcing them.
EXPECTED_FEV_COUNTS = {"fev2": (907, 1671), "fev3": (1378, 3196)}


def build_fev(claims: Iterable[SourceClaim], mode: str) -> tuple[list[ClaimRecord], BuildReport]:
    """Derive the 2-way ("fev2") or 3-way ("fev3") claim set.

    Claims natively marked disputed are excluded up front. The overall label
    is the plurality vote over evidence labels (ties -> NOT_ENOUGH_INFO);
    fev2 additionally keeps only SUPPORTS/REFUTES aggregates. References are
    the evidence sentences whose label equals the aggregate; claims left with
    no references are dropped.
    """
    mode = mode.lower()
    if mode not in ("fev2", "fev3"):
        raise DatasetError(f"unknown mode {mode!r} (expected fev2 or fev3)")
    records = []
    claims = list(claims)
    dropped_disputed = dropped_label = dropped_no_refs = 0
    for claim in claims:
        if claim.source_label and claim.source_label.strip().upper() == "DISPUTED":
            dropped_disputed += 1
            continue
        agg = aggregate_label([e.label for e in claim.evidence])
        if mode == "fev2" and agg not in (VeracityLabel.SUPPORTS, VeracityLabel.REFUTES):
            dropped_label += 1
            continue
        references = [e.text for e in claim.evidence if e.label == agg]
        if not references:
            dropped_no_refs += 1
            continue
        records.append(
            ClaimRecord(
                claim_id=claim.claim_id,
                text=claim.text,
                evidence=list(claim.evidence),
                overall_label=agg,
                references=references,
            )
        )
    expected = EXPECTED_FEV_COUNTS.get(mode, (None, None))
    report = BuildReport(
        mode=mode,
        claims_in=len(claims),
        claims_kept=len(records),
        pairs_kept=sum(len(r.references) for r in records),
        dropped_disputed=dropped_disputed,
        dropped_label=dropped_label,
        dropped_no_references=dropped_no_refs,
        expected_claims=expected[0],
        expected_pairs=expected[1],
    )
    return records, report


# ---- splitting ----------------------------------------------------------------

def _largest_remainder(total: int, ratios: Sequence[float]) -> list[int]:
    """Integer allocation of `total` across parts, proportional to ratios."""
    exact = [total * r for r in ratios]
    counts = [math.floor(x) for x in exact]
    shortfall = total - sum(counts)
    by_remainder = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in by_remainder[:shortfall]:
        counts[i] += 1
    return counts


def stratified_split(records: Sequence[ClaimRecord], ratios: Sequence[float],
                     seed: int) -> DatasetSplit:
    """Seeded train/validation/test split preserving per-label proportions.

    Each label class is shuffled and allocated by largest remainder, so every
    part's class counts match the ratios within one record.
    """
    if len(ratios) != 3:
        raise DatasetError("ratios must have exactly 3 parts (train/validation/test)")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DatasetError(f"ratios must sum to 1, got {sum(ratios)}")
    rng = random.Random(seed)
    by_label: dict[VeracityLabel, list[ClaimRecord]] = {}
    for record in records:
        by_label.setdefault(record.overall_label, []).append(record)

    parts: tuple[list[ClaimRecord], ...] = ([], [], [])
    for label in sorted(by_label, key=lambda l: l.value):
        group = list(by_label[label])
        if len(group) < 3:
            logger.warning(
                "label class %s has only %d record(s); allocating greedily",
                label.value, len(group),
            )
        rng.shuffle(group)
        counts = _largest_remainder(len(group), ratios)
        start = 0
        for part, take in zip(parts, counts):
            part.extend(group[start:start + take])
            start += take
    return DatasetSplit(train=parts[0], validation=parts[1], test=parts[2], seed=seed)


def sized_split(records: Sequence[ClaimRecord], sizes: Sequence[int],
                seed: int) -> DatasetSplit:
    """Plain random split at exact part sizes (no stratification)."""
    if len(sizes) != 3:
        raise DatasetError("sizes must have exactly 3 parts")
    if sum(sizes) != len(records):
        raise DatasetError(f"sizes {tuple(sizes)} do not sum to record count {len(records)}")
    shuffled = list(records)
    random.Random(seed).shuffle(shuffled)
    a, b = sizes[0], sizes[0] + sizes[1]
    return DatasetSplit(train=shuffled[:a], validation=shuffled[a:b],
                        test=shuffled[b:], seed=seed)


FEEDBACK_SPLIT_SIZES = (90, 15, 25)


def feedback_splits(records: Sequence[ClaimRecord], seeds: Sequence[int],
                    sizes: Sequence[int] = FEEDBACK_SPLIT_SIZES) -> list[DatasetSplit]:
    """One random split per seed; metrics downstream average over them.

    When the collection size differs from sum(sizes), sizes are rescaled
    proportionally by largest remainder.
    """
    if sum(sizes) != len(records):
        total = sum(sizes)
        sizes = _largest_remainder(len(records), [s / total for s in sizes])
        logger.warning("rescaled split sizes to %s for %d records", tuple(sizes), len(records))
    return [sized_split(records, sizes, seed) for seed in seeds]


# ---- expert-review pairs -------------------------------------------------------

def load_feedback(path: str | os.PathLike) -> list[ClaimRecord]:
    """Read claim/explanation review pairs (JSONL: claim, explanation, label).

    Every claim carries exactly one reference explanation. The label
    distribution is retained but reported, since these collections skew
    overwhelmingly toward refutations.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                claim, explanation, label = obj["claim"], obj["explanation"], obj["label"]
            except (KeyError, json.JSONDecodeError) as exc:
                key = exc.args[0] if isinstance(exc, KeyError) else exc
                raise DatasetError(f"{path}: line {line_no}: missing or bad field {key}") from exc
            overall = parse_label(label)
            records.append(
                ClaimRecord(
                    claim_id=str(obj.get("claim_id", line_no - 1)),
                    text=claim,
                    evidence=[EvidenceSentence(text=explanation, label=overall)],
                    overall_label=overall,
                    references=[explanation],
                )
            )
    counts = Counter(r.overall_label for r in records)
    if records and max(counts.values()) / len(records) > 0.8:
        logger.warning(
            "feedback labels are imbalanced (%s); use for generation only",
            {k.value: v for k, v in counts.items()},
        )
    return records


# ---- ClaimRecord JSONL ---------------------------------------------------------

def save_records(records: Iterable[ClaimRecord], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({
                "claim_id": r.claim_id,
                "text": r.text,
                "label": r.overall_label.value,
                "references": r.references,
                "evidence": [{"text": e.text, "label": e.label.value} for e in r.evidence],
            }, ensure_ascii=False) + "\n")


def load_records(path: str | os.PathLike) -> list[ClaimRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(ClaimRecord(
                    claim_id=str(obj["claim_id"]),
                    text=obj["text"],
                    evidence=[
                        EvidenceSentence(text=e["text"], label=VeracityLabel(e["label"]))
                        for e in obj.get("evidence", [])
                    ],
                    overall_label=VeracityLabel(obj["label"]),
                    references=list(obj["references"]),
                ))
            except (KeyError, ValueError) as exc:
                raise DatasetError(f"{path}: line {line_no}: {exc}") from exc
    return records
