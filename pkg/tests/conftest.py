import json
import random
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from climafact.corpus import Document, PassageStore, segment_document
from climafact.datasets import (ClaimRecord, EvidenceSentence, VeracityLabel,
                                save_records)

VOCAB = [
    "ocean", "acid", "carbon", "dioxide", "warming", "climate", "ice", "sheet",
    "glacier", "sea", "level", "rise", "temperature", "emission", "greenhouse",
    "gas", "model", "record", "trend", "solar", "cycle", "cloud", "feedback",
    "arctic", "antarctic", "coral", "reef", "drought", "wildfire", "monsoon",
    "permafrost", "methane", "ozone", "aerosol", "albedo", "enso", "forcing",
    "anomaly", "proxy", "satellite", "station", "projection", "scenario",
    "mitigation", "adaptation", "policy", "energy", "fossil", "fuel", "renewable",
]


def synthetic_passages(n_passages: int, seed: int, min_words=5, max_words=40) -> list[str]:
    rng = random.Random(seed)
    texts = []
    for _ in range(n_passages):
        n_words = rng.randint(min_words, max_words)
        texts.append(" ".join(rng.choice(VOCAB) for _ in range(n_words)))
    return texts


def store_from_texts(texts: list[str], label: str = "synthetic") -> PassageStore:
    passages = []
    next_id = 0
    for i, text in enumerate(texts):
        chunk = segment_document(Document(doc_id=f"d{i}", title=f"t{i}", body=text),
                                 start_id=next_id)
        passages.extend(chunk)
        next_id += len(chunk)
    return PassageStore(passages, source_label=label)


@pytest.fixture(scope="session")
def small_store() -> PassageStore:
    return store_from_texts(synthetic_passages(50, seed=7))


@pytest.fixture(scope="session")
def corpus_1k_texts() -> list[str]:
    return synthetic_passages(1000, seed=11)


@pytest.fixture(scope="session")
def store_1k(corpus_1k_texts) -> PassageStore:
    return store_from_texts(corpus_1k_texts)


def make_claim_records(n: int, seed: int, labels=None) -> list[ClaimRecord]:
    rng = random.Random(seed)
    labels = labels or [VeracityLabel.SUPPORTS, VeracityLabel.REFUTES]
    records = []
    for i in range(n):
        label = labels[i % len(labels)]
        text = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(4, 10)))
        refs = [" ".join(rng.choice(VOCAB) for _ in range(rng.randint(6, 14)))
                for _ in range(rng.randint(1, 3))]
        records.append(ClaimRecord(
            claim_id=str(i),
            text=text,
            evidence=[EvidenceSentence(text=r, label=label) for r in refs],
            overall_label=label,
            references=refs,
        ))
    return records


@pytest.fixture()
def claim_records_10() -> list[ClaimRecord]:
    return make_claim_records(10, seed=3)


@pytest.fixture()
def dataset_file_10(tmp_path, claim_records_10) -> Path:
    path = tmp_path / "claims.jsonl"
    save_records(claim_records_10, path)
    return path


def write_feedback_fixture(path, n=130, seed=5):
    """Synthetic expert-review pairs in the feedback JSONL schema."""
    rng = random.Random(seed)
    verdicts = ["Incorrect"] * 110 + ["Misleading"] * 12 + ["Mostly accurate"] * 8
    rng.shuffle(verdicts)
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n):
            claim = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(5, 12)))
            explanation = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(15, 40)))
            fh.write(json.dumps({
                "claim_id": f"fb-{i}",
                "claim": claim,
                "explanation": explanation,
                "label": verdicts[i % len(verdicts)],
            }) + "\n")
    return path


@pytest.fixture()
def feedback_file(tmp_path):
    return write_feedback_fixture(tmp_path / "feedback.jsonl")


def random_embeddings(n: int, dim: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((n, dim)).astype(np.float32)


# ---- acceptance summary: one pass/fail line per criterion ----

_ACCEPTANCE_RESULTS: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if "test_acceptance" not in str(item.fspath):
        return
    if report.when == "call" or (report.when == "setup" and report.skipped):
        _ACCEPTANCE_RESULTS[item.name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE_RESULTS.items()):
        flag = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(outcome, outcome)
        terminalreporter.write_line(f"{flag:6s} {name}")
