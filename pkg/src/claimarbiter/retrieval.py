"""Entity extraction, query generation, and article retrieval.

Article selection interleaves result lists round-robin: queries take turns in
origin-rank order, each contributing its next not-yet-seen URL, so no single
query dominates the article set. Deduplication happens on normalized URLs.
Bodies shorter than MIN_BODY_CHARS after text extraction count as empty and
the candidate is dropped; the round-robin simply continues until the article
budget is filled or candidates run out.

The fixture provider serves canned results from a directory laid out as

    <root>/queries/<digest of query text>.json   ranked result list
    <root>/bodies/<digest of normalized url>.txt  plain-text body

which makes retrieval fully deterministic for tests and offline runs.
"""

from __future__ import annotations

import hashlib
import html as _html
import json
import logging
import os
import re
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import requests

from claimarbiter.core import Article, Claim, EntitySet, PipelineConfig, Query, normalize_url
from claimarbiter.errors import (
    EntityExtractionFailed,
    MalformedResponse,
    NoArticlesFound,
    ProviderUnreachable,
    QueryGenerationFailed,
)
from claimarbiter.prompts import TemplateId

logger = logging.getLogger(__name__)

# Bodies shorter than this after text extraction carry no assessable content.
MIN_BODY_CHARS = 200

_DIGEST_LENGTH = 16


def query_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:_DIGEST_LENGTH]


def url_digest(url: str) -> str:
    return hashlib.sha256(normalize_url(url).encode("utf-8")).hexdigest()[:_DIGEST_LENGTH]


def query_fixture_path(root: str | Path, text: str) -> Path:
    return Path(root) / "queries" / f"{query_digest(text)}.json"


def body_fixture_path(root: str | Path, url: str) -> Path:
    return Path(root) / "bodies" / f"{url_digest(url)}.txt"


@dataclass(frozen=True)
class SearchResult:
    """One ranked hit from a search provider."""

    url: str
    title: str
    snippet: str
    rank: int


@dataclass(frozen=True)
class RetrievalResult:
    """Selected articles plus the candidates dropped along the way."""

    articles: tuple[Article, ...]
    dropped: tuple[tuple[str, str], ...]  # (normalized url, reason)


_TAG_BLOCK_RE = re.compile(r"<(script|style)\b.*?</\1\s*>", re.IGNORECASE | re.DOTALL)
_TAG_RE = re.compile(r"<[^>]+>")


def html_to_text(markup: str) -> str:
    """Strip markup down to visible text with collapsed whitespace."""
    text = _TAG_BLOCK_RE.sub(" ", markup)
    text = _TAG_RE.sub(" ", text)
    return " ".join(_html.unescape(text).split())


class FixtureSearchProvider:
    """Serves search results and bodies from a fixture directory."""

    deterministic = True

    def __init__(self, root: str | Path, results_per_query: int = 10):
        self.root = Path(root)
        self.results_per_query = results_per_query

    def search(self, query: Query) -> list[SearchResult]:
        path = query_fixture_path(self.root, query.text)
        if not path.exists():
            logger.warning("no search fixture for query %r (%s)", query.text, path.name)
            return []
        entries = json.loads(path.read_text(encoding="utf-8"))
        results = [
            SearchResult(
                url=entry["url"],
                title=entry.get("title", ""),
                snippet=entry.get("snippet", ""),
                rank=rank,
            )
            for rank, entry in enumerate(entries)
        ]
        return results[: self.results_per_query]

    def fetch_body(self, url: str) -> str:
        path = body_fixture_path(self.root, url)
        if not path.exists():
            return ""
        return path.read_text(encoding="utf-8")


class LiveSearchProvider:
    """Web search API client plus a plain HTTP body fetcher."""

    deterministic = False

    def __init__(self, endpoint: str, credential_env: str = "BRAVE_API_KEY",
                 results_per_query: int = 10, timeout: float = 20.0, max_attempts: int = 3):
        self._endpoint = endpoint
        self._credential_env = credential_env
        self.results_per_query = results_per_query
        self._timeout = timeout
        self._max_attempts = max_attempts

    def search(self, query: Query) -> list[SearchResult]:
        credential = os.environ.get(self._credential_env, "")
        last_error: Exception | None = None
        for attempt in range(1, self._max_attempts + 1):
            try:
                response = requests.get(
                    self._endpoint,
                    params={"q": query.text, "count": self.results_per_query},
                    headers={"X-Subscription-Token": credential, "Accept": "application/json"},
                    timeout=self._timeout,
                )
                response.raise_for_status()
                payload = response.json()
                hits = payload.get("web", {}).get("results", [])
                return [
                    SearchResult(
                        url=hit["url"],
                        title=hit.get("title", ""),
                        snippet=hit.get("description", ""),
                        rank=rank,
                    )
                    for rank, hit in enumerate(hits[: self.results_per_query])
                ]
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_error = exc
                if attempt < self._max_attempts:
                    time.sleep(min(0.5 * 2 ** (attempt - 1), 4.0))
        raise ProviderUnreachable(
            f"search provider failed after {self._max_attempts} attempts: {last_error}"
        ) from last_error

    def fetch_body(self, url: str) -> str:
        try:
            response = requests.get(url, timeout=self._timeout)
            response.raise_for_status()
        except requests.RequestException as exc:
            logger.warning("body fetch failed for %s: %s", url, exc)
            return ""
        return html_to_text(response.text)


def _dedup_casefold(items: Iterable[str]) -> list[str]:
    """Keep the first spelling of each case-insensitively distinct item."""
    seen: set[str] = set()
    kept: list[str] = []
    for item in items:
        cleaned = " ".join(item.split())
        if not cleaned:
            continue
        key = cleaned.casefold()
        if key in seen:
            continue
        seen.add(key)
        kept.append(cleaned)
    return kept


def extract_entities(claim: Claim, cfg: PipelineConfig, gateway) -> EntitySet:
    """Ask the model for the claim's key entities; exactly cfg.entity_count.

    Over-generation is truncated in model order. Under-generation after
    case-insensitive deduplication gets one re-request whose results merge
    with the first; a persistent shortfall is fatal for the claim.
    """
    retry_note = (
        f"\nYour previous answer had duplicates or too few entities; give"
        f" exactly {cfg.entity_count} distinct entities."
    )
    collected: list[str] = []
    for note in ("", retry_note):
        try:
            reply = gateway.structured(
                TemplateId.EXTRACT_ENTITIES,
                {
                    "claim": claim.text,
                    "entity_count": str(cfg.entity_count),
                    "retry_note": note,
                },
            )
        except MalformedResponse as exc:
            raise EntityExtractionFailed(f"claim {claim.id}: {exc}") from exc
        collected = _dedup_casefold(collected + reply.fields["entities"])
        if len(collected) >= cfg.entity_count:
            return EntitySet(tuple(collected[: cfg.entity_count]))
    raise EntityExtractionFailed(
        f"claim {claim.id}: model produced {len(collected)} distinct entities,"
        f" need {cfg.entity_count}"
    )


def generate_queries(claim: Claim, entities: EntitySet, cfg: PipelineConfig,
                     gateway) -> list[Query]:
    """Ask the model for search queries; aims for exactly cfg.query_count.

    Duplicates (after whitespace and case normalization) collapse. A shortfall
    gets one re-request; if the count still falls short the pipeline proceeds
    with what it has and logs a warning, but zero queries is fatal.
    """
    retry_note = (
        f"\nYour previous answer had duplicates or too few queries; give"
        f" exactly {cfg.query_count} distinct queries."
    )
    collected: list[str] = []
    for note in ("", retry_note):
        try:
            reply = gateway.structured(
                TemplateId.GENERATE_QUERIES,
                {
                    "claim": claim.text,
                    "entities": ", ".join(entities),
                    "query_count": str(cfg.query_count),
                    "retry_note": note,
                },
            )
        except MalformedResponse as exc:
            raise QueryGenerationFailed(f"claim {claim.id}: {exc}") from exc
        collected = _dedup_casefold(collected + reply.fields["queries"])
        if len(collected) >= cfg.query_count:
            break
    if not collected:
        raise QueryGenerationFailed(f"claim {claim.id}: model produced no usable queries")
    if len(collected) < cfg.query_count:
        logger.warning(
            "claim %s: proceeding with %d queries, wanted %d",
            claim.id, len(collected), cfg.query_count,
        )
    return [
        Query(text=text, origin_rank=rank)
        for rank, text in enumerate(collected[: cfg.query_count])
    ]


def retrieve_articles(queries: Sequence[Query], provider,
                      cfg: PipelineConfig) -> RetrievalResult:
    """Search every query and select up to cfg.article_count distinct articles.

    Selection is a sequential fold over the per-query result lists, so the
    output is a pure function of those lists no matter how the underlying
    fetches were scheduled. A query whose search fails is skipped with a
    warning; if every query comes back empty the claim has nothing to stand
    on and NoArticlesFound is raised.
    """
    ordered = sorted(queries, key=lambda query: query.origin_rank)
    queues: list[deque[SearchResult]] = []
    for query in ordered:
        try:
            results = provider.search(query)
        except ProviderUnreachable as exc:
            logger.warning("claim query %r skipped: %s", query.text, exc)
            results = []
        queues.append(deque(results))
    if not any(queues):
        raise NoArticlesFound(f"all {len(ordered)} queries returned no results")

    seen: set[str] = set()
    accepted: list[tuple[str, str, str]] = []  # (url, title, body)
    sources: dict[str, set[int]] = {}
    dropped: list[tuple[str, str]] = []

    while len(accepted) < cfg.article_count:
        progressed = False
        for query, queue in zip(ordered, queues):
            if len(accepted) >= cfg.article_count:
                break
            candidate: SearchResult | None = None
            url = ""
            while queue:
                result = queue.popleft()
                url = normalize_url(result.url)
                if url in seen:
                    # already taken (or dropped) via another query; keep the
                    # provenance but do not spend this query's turn on it
                    if url in sources:
                        sources[url].add(query.origin_rank)
                    continue
                candidate = result
                break
            if candidate is None:
                continue
            progressed = True
            seen.add(url)
            body = provider.fetch_body(candidate.url).strip()
            if len(body) < MIN_BODY_CHARS:
                dropped.append((url, "empty_body"))
                continue
            sources[url] = {query.origin_rank}
            accepted.append((url, candidate.title, body))
        if not progressed:
            break

    articles = tuple(
        Article(url=url, title=title, body=body, source_queries=frozenset(sources[url]))
        for url, title, body in accepted
    )
    return RetrievalResult(articles=articles, dropped=tuple(dropped))
