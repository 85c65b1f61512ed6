"""Entity linking against a Spotlight-compatible annotation service.

Mentions are fetched from ``{base_url}/rest/annotate`` and cached on disk
keyed by (text hash, confidence), so repeated queries never touch the
network. Any service failure degrades to an empty mention list with a
logged warning; retrieval then proceeds words-only.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from typing import Optional
from urllib.parse import unquote, urlparse

import requests

from .sparse import tokenize

logger = logging.getLogger(__name__)

DEFAULT_CONFIDENCE = 0.5


@dataclass(frozen=True)
class EntityMention:
    surface: str
    uri: str
    offset: int


@dataclass
class LinkerConfig:
    base_url: str
    confidence: float = DEFAULT_CONFIDENCE
    cache_dir: Optional[str] = None
    timeout: float = 10.0


class EntityLinker:
    def __init__(self, config: LinkerConfig, session: Optional[requests.Session] = None):
        self.config = config
        self.session = session or requests.Session()
        if config.cache_dir:
            os.makedirs(config.cache_dir, exist_ok=True)

    def _cache_path(self, text: str) -> Optional[str]:
        if not self.config.cache_dir:
            return None
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return os.path.join(self.config.cache_dir, f"{digest}_{self.config.confidence}.json")

    def link(self, text: str) -> list[EntityMention]:
        """Annotate text, serving from the cache when possible."""
        cache_path = self._cache_path(text)
        if cache_path and os.path.exists(cache_path):
            with open(cache_path, encoding="utf-8") as fh:
                return [EntityMention(**m) for m in json.load(fh)]

        mentions = self._annotate(text)
        if cache_path is not None and mentions is not None:
            # atomic write: concurrent readers never see a partial file
            fd, tmp = tempfile.mkstemp(dir=self.config.cache_dir, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump([m.__dict__ for m in mentions], fh)
            os.replace(tmp, cache_path)
        return mentions or []

    def _annotate(self, text: str) -> Optional[list[EntityMention]]:
        """One service round trip; None signals a degradation (not cached)."""
        url = self.config.base_url.rstrip("/") + "/rest/annotate"
        try:
            resp = self.session.get(
                url,
                params={"text": text, "confidence": self.config.confidence},
                headers={"Accept": "application/json"},
                timeout=self.config.timeout,
            )
            resp.raise_for_status()
            payload = resp.json()
        except (requests.RequestException, ValueError) as exc:
            logger.warning("entity linking degraded to words-only: %s", exc)
            return None
        try:
            resources = payload.get("Resources", []) or []
            return [
                EntityMention(
                    surface=r["@surfaceForm"],
                    uri=r["@URI"],
                    offset=int(r["@offset"]),
                )
                for r in resources
            ]
        except (KeyError, TypeError, ValueError) as exc:
            logger.warning("malformed annotation response, degrading: %s", exc)
            return None


def concept_terms(mentions: list[EntityMention]) -> list[str]:
    """Query terms contributed by linked entities.

    The final path segment of each URI is URL-unquoted, underscores split,
    and run through the standard tokenizer, e.g.
    ``http://dbpedia.org/resource/Ice_age`` -> ["ice", "age"].
    """
    terms: list[str] = []
    for mention in mentions:
        segment = unquote(urlparse(mention.uri).path.rstrip("/").rsplit("/", 1)[-1])
        terms.extend(tokenize(segment.replace("_", " ")))
    return terms


def link_entities(text: str, config: LinkerConfig,
                  session: Optional[requests.Session] = None) -> list[EntityMention]:
    """Convenience wrapper building a one-shot linker."""
    return EntityLinker(config, session=session).link(text)
