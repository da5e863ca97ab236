"""Per-article assessment: relevance, structural weight, and stance.

A single model call answers all three questions for one article. Attribute
names in the response are matched case-insensitively and ignoring separator
characters against the six canonical names; unrecognized names are ignored
and duplicates count once, so the weight is always the size of the
recognized set.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from claimarbiter.core import Article, ArticleAssessment, AttributeName, Claim, EntitySet, stance_sign
from claimarbiter.errors import AllArticlesUnassessable, MalformedResponse
from claimarbiter.prompts import TemplateId

logger = logging.getLogger(__name__)

_NORMALIZE_RE = re.compile(r"[^a-z0-9]+")

_CANONICAL = {
    _NORMALIZE_RE.sub("", attribute.value): attribute for attribute in AttributeName
}


def canonical_attribute(name: str) -> AttributeName | None:
    """Resolve a model-written attribute name; None if unrecognized."""
    return _CANONICAL.get(_NORMALIZE_RE.sub("", name.lower()))


@dataclass(frozen=True)
class BatchAssessment:
    """Assessments in input article order plus the articles dropped."""

    assessments: tuple[ArticleAssessment, ...]
    dropped: tuple[tuple[str, str], ...]  # (url, reason)


def assess_article(article: Article, claim: Claim, entities: EntitySet,
                   gateway) -> ArticleAssessment:
    """Assess one article; raises MalformedResponse if the reply stays broken."""
    if not article.body:
        raise ValueError(f"article {article.url} has an empty body")
    reply = gateway.structured(
        TemplateId.ASSESS_ARTICLE,
        {
            "claim": claim.text,
            "entities": ", ".join(entities),
            "article_url": article.url,
            "article_title": article.title,
            "article_body": article.body,
        },
    )
    attributes = frozenset(
        attribute
        for attribute in (canonical_attribute(name) for name in reply.fields["attributes"])
        if attribute is not None
    )
    return ArticleAssessment(
        article_ref=article.url,
        relevance=reply.fields["relevance"],
        weight=len(attributes),
        verdict=stance_sign(reply.fields["verdict"]),
        attributes_found=attributes,
        raw_response_ref=reply.digest,
    )


def assess_all(articles: Sequence[Article], claim: Claim, entities: EntitySet,
               gateway, max_workers: int = 1) -> BatchAssessment:
    """Assess every article, preserving input order in the output.

    Articles whose assessment stays malformed after the gateway retry are
    dropped, not guessed. If nothing survives the claim cannot be scored and
    AllArticlesUnassessable is raised.
    """

    def one(article: Article) -> ArticleAssessment | MalformedResponse:
        try:
            return assess_article(article, claim, entities, gateway)
        except MalformedResponse as exc:
            return exc

    if max_workers > 1 and len(articles) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            outcomes = list(executor.map(one, articles))
    else:
        outcomes = [one(article) for article in articles]

    assessments: list[ArticleAssessment] = []
    dropped: list[tuple[str, str]] = []
    for article, outcome in zip(articles, outcomes):
        if isinstance(outcome, ArticleAssessment):
            assessments.append(outcome)
        else:
            logger.warning("article %s dropped: %s", article.url, outcome)
            dropped.append((article.url, f"unassessable: {outcome}"))
    if not assessments:
        raise AllArticlesUnassessable(
            f"claim {claim.id}: 0 of {len(articles)} articles produced a usable assessment"
        )
    return BatchAssessment(assessments=tuple(assessments), dropped=tuple(dropped))
