"""Generator input assembly, joint label+explanation output parsing, backends.

Each retrieved passage is paired with the claim into one context string
``lab-exp: claim: {claim} context: {passage}``; a generator consumes all k
contexts for a claim at once and answers with a veracity label and an
explanation separated by the first semicolon. This module owns only that
wire contract plus three pluggable backends: an echo stub for tests, the
top-1-passage baseline (no label), and an HTTP client for a remote
generation service.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Final, Optional, Protocol, Sequence, Union

import requests

from .datasets import VeracityLabel

logger = logging.getLogger(__name__)

TASK_PREFIX: Final = "lab-exp:"
CLAIM_MARKER: Final = "claim:"
CONTEXT_MARKER: Final = "context:"
# tokens the template itself spends out of the per-context budget
_TEMPLATE_TOKENS: Final = 3

DEFAULT_MAX_TOKENS: Final = 200
DEFAULT_MAX_NEW_TOKENS: Final = 150

UNPARSEABLE: Final = "UNPARSEABLE"

Label = Union[VeracityLabel, str]


class FidError(Exception):
    pass


class GenerationTransportError(FidError):
    """Remote backend failure; carries the claim id for failure bookkeeping."""

    def __init__(self, claim_id: str, message: str):
        super().__init__(f"claim {claim_id}: {message}")
        self.claim_id = claim_id


@dataclass(frozen=True)
class FidInput:
    claim_id: str
    claim_text: str
    contexts: tuple[str, ...]

    @property
    def k(self) -> int:
        return len(self.contexts)


@dataclass(frozen=True)
class FidOutput:
    label: Label
    explanation: str
    raw: str


def _passage_text(passage) -> str:
    return passage if isinstance(passage, str) else passage.text


def assemble(claim_text: str, passages: Sequence, max_tokens: int = DEFAULT_MAX_TOKENS,
             claim_id: str = "") -> FidInput:
    """Build the k claim+passage contexts for one claim.

    Each context is truncated independently to at most ``max_tokens``
    whitespace tokens by cutting passage words from the right; the claim is
    never truncated. Raises if the claim alone exceeds the budget.
    """
    if len(passages) < 1:
        raise FidError("at least one passage is required")
    claim_words = claim_text.split()
    passage_budget = max_tokens - _TEMPLATE_TOKENS - len(claim_words)
    if passage_budget < 0:
        raise FidError(
            f"claim exceeds context budget ({len(claim_words)} words, "
            f"{max_tokens - _TEMPLATE_TOKENS} available)"
        )
    claim_part = " ".join(claim_words)
    contexts = []
    for passage in passages:
        words = _passage_text(passage).split()[:passage_budget]
        contexts.append(
            f"{TASK_PREFIX} {CLAIM_MARKER} {claim_part} {CONTEXT_MARKER} {' '.join(words)}".rstrip()
        )
    return FidInput(claim_id=claim_id, claim_text=claim_text, contexts=tuple(contexts))


def claim_only_input(claim_text: str, claim_id: str = "",
                     max_tokens: int = DEFAULT_MAX_TOKENS) -> FidInput:
    """Degenerate single-context input with no retrieved passage.

    Used for the no-retrieval baseline where the generator sees the claim
    alone.
    """
    claim_words = claim_text.split()
    if len(claim_words) + 1 > max_tokens:
        raise FidError("claim exceeds context budget")
    return FidInput(
        claim_id=claim_id,
        claim_text=claim_text,
        contexts=(f"{TASK_PREFIX} {CLAIM_MARKER} {' '.join(claim_words)}",),
    )


_LABEL_LOOKUP = {label.value: label for label in VeracityLabel}


def parse_output(raw: str) -> FidOutput:
    """Split generator output at the first semicolon into (label, explanation).

    The label segment is matched case-insensitively (internal whitespace and
    hyphens count as underscores). Anything unmatched comes back with label
    UNPARSEABLE and the full raw text as the explanation; the parser is total.
    """
    if ";" in raw:
        head, _, tail = raw.partition(";")
        key = "_".join(head.strip().upper().replace("-", " ").split())
        label = _LABEL_LOOKUP.get(key)
        if label is not None:
            return FidOutput(label=label, explanation=tail.strip(), raw=raw)
    return FidOutput(label=UNPARSEABLE, explanation=raw, raw=raw)


def format_output(label: VeracityLabel, explanation: str) -> str:
    """Canonical joint output string; parse_output inverts it."""
    return f"{label.value}; {explanation}"


class Searcher(Protocol):
    """Anything that can rank passages for a claim and hand back their text."""

    def retrieve(self, claim_id: str, claim_text: str, k: int): ...

    def passage_text(self, passage_id: int) -> str: ...


class GeneratorBackend(Protocol):
    kind: str

    def generate(self, input: FidInput) -> FidOutput: ...


class EchoBackend:
    """Test stub: answers with the first context verbatim."""

    kind = "echo"

    def generate(self, input: FidInput) -> FidOutput:
        if not input.contexts:
            raise FidError("echo backend needs at least one context")
        return parse_output(input.contexts[0])


class Top1Backend:
    """Baseline: the top-ranked retrieved passage is the explanation.

    Predicts no label, so accuracy is not reported for this backend.
    """

    kind = "top1"

    def __init__(self, searcher: Searcher):
        self.searcher = searcher

    def generate(self, input: FidInput) -> FidOutput:
        return top1_explanation(input.claim_text, self.searcher, claim_id=input.claim_id)


def top1_explanation(claim_text: str, searcher: Searcher, claim_id: str = "") -> FidOutput:
    """Explanation = verbatim text of the rank-1 passage for the claim."""
    hits = searcher.retrieve(claim_id, claim_text, 1)
    if not hits:
        logger.warning("no passages retrieved for claim %r; empty explanation", claim_id)
        return FidOutput(label=UNPARSEABLE, explanation="", raw="")
    text = searcher.passage_text(hits[0].passage_id)
    return FidOutput(label=UNPARSEABLE, explanation=text, raw=text)


class RemoteBackend:
    """HTTP client for a generation service.

    POST ``{endpoint}/generate`` with ``{"claim_id", "contexts",
    "max_new_tokens"}``; the response body carries the raw joint output as
    ``{"raw": str}``. Transport and HTTP failures surface as
    GenerationTransportError so a harness can record the claim as failed and
    carry on.
    """

    kind = "remote"

    def __init__(self, endpoint: str, max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS,
                 timeout: float = 60.0, session: Optional[requests.Session] = None):
        self.endpoint = endpoint.rstrip("/")
        self.max_new_tokens = max_new_tokens
        self.timeout = timeout
        self.session = session or requests.Session()

    def generate(self, input: FidInput) -> FidOutput:
        try:
            resp = self.session.post(
                f"{self.endpoint}/generate",
                json={
                    "claim_id": input.claim_id,
                    "contexts": list(input.contexts),
                    "max_new_tokens": self.max_new_tokens,
                },
                timeout=self.timeout,
            )
            resp.raise_for_status()
            raw = resp.json()["raw"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise GenerationTransportError(input.claim_id, str(exc)) from exc
        return parse_output(raw)


class EncoderClient:
    """Client for a remote embedding service (``/encode`` JSON mode)."""

    def __init__(self, endpoint: str, timeout: float = 60.0,
                 session: Optional[requests.Session] = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()

    def encode(self, texts: Sequence[str]):
        import numpy as np

        resp = self.session.post(
            f"{self.endpoint}/encode",
            json={"texts": list(texts)},
            timeout=self.timeout,
        )
        resp.raise_for_status()
        payload = resp.json()
        return np.asarray(payload["vectors"], dtype=np.float32)
