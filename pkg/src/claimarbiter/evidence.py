"""Evidence partitioning, balancing, and brief construction for the debate.

Relevant articles split by their verdict sign into a supporting and a
refuting pool; weight plays no role in membership, so a relevant article
with zero attributes is still debatable evidence. Each side is ranked by
weight (descending, URL as the tie-break) and both sides are truncated to
the same size so neither advocate argues from a larger pile. Passages are
quoted verbatim: a candidate quote survives only if it appears in the
article body once whitespace runs are collapsed on both sides.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

from claimarbiter.core import Article, ArticleAssessment, Claim, Stance
from claimarbiter.errors import MalformedResponse, OneSidedEvidence
from claimarbiter.prompts import TemplateId

logger = logging.getLogger(__name__)

_SIDE_LABEL = {Stance.SUPPORT: "supporting", Stance.REFUTE: "refuting"}


@dataclass(frozen=True)
class EvidencePartition:
    """Relevant evidence split by stance; members are (article, assessment)."""

    supporting: tuple[tuple[Article, ArticleAssessment], ...]
    refuting: tuple[tuple[Article, ArticleAssessment], ...]

    def __post_init__(self):
        object.__setattr__(self, "supporting", tuple(self.supporting))
        object.__setattr__(self, "refuting", tuple(self.refuting))
        urls: set[str] = set()
        for side, expected_sign in ((self.supporting, 1), (self.refuting, -1)):
            for article, assessment in side:
                if assessment.relevance != 1:
                    raise ValueError(f"partition member {article.url} is not relevant")
                if assessment.verdict != expected_sign:
                    raise ValueError(
                        f"partition member {article.url} has verdict {assessment.verdict},"
                        f" expected {expected_sign}"
                    )
                if article.url != assessment.article_ref:
                    raise ValueError(f"article/assessment mismatch for {article.url}")
                if article.url in urls:
                    raise ValueError(f"duplicate article in partition: {article.url}")
                urls.add(article.url)

    def side(self, stance: Stance) -> tuple[tuple[Article, ArticleAssessment], ...]:
        return self.supporting if stance is Stance.SUPPORT else self.refuting

    def side_weight(self, stance: Stance) -> int:
        return sum(assessment.weight for _, assessment in self.side(stance))

    @property
    def is_balanced(self) -> bool:
        return len(self.supporting) == len(self.refuting)


@dataclass(frozen=True)
class Passage:
    """One verbatim quote from an article plus the model's reason it matters."""

    url: str
    text: str
    reason: str


@dataclass(frozen=True)
class EvidenceBrief:
    """The rendered evidence pack one advocate argues from."""

    stance: Stance
    passages: tuple[Passage, ...]
    concatenated: str


@dataclass(frozen=True)
class PrepEvent:
    """An article dropped or skipped while building the briefs."""

    kind: str
    url: str
    detail: str


@dataclass(frozen=True)
class PreparedEvidence:
    """Balanced partition, briefs for both advocates, and prep drop events."""

    partition: EvidencePartition
    briefs: tuple[EvidenceBrief, EvidenceBrief]  # (support, refute)
    passages: dict[str, tuple[Passage, ...]]
    events: tuple[PrepEvent, ...]


def _rank_key(member: tuple[Article, ArticleAssessment]) -> tuple[int, str]:
    article, assessment = member
    return (-assessment.weight, article.url)


def partition_evidence(assessments: Sequence[ArticleAssessment],
                       articles: Sequence[Article]) -> EvidencePartition:
    """Split relevant assessments by verdict sign, in assessment order."""
    by_url = {article.url: article for article in articles}
    supporting: list[tuple[Article, ArticleAssessment]] = []
    refuting: list[tuple[Article, ArticleAssessment]] = []
    for assessment in assessments:
        if assessment.relevance != 1:
            continue
        try:
            article = by_url[assessment.article_ref]
        except KeyError:
            raise ValueError(f"assessment references unknown article {assessment.article_ref}")
        (supporting if assessment.verdict == 1 else refuting).append((article, assessment))
    return EvidencePartition(supporting=tuple(supporting), refuting=tuple(refuting))


def rank_and_balance(partition: EvidencePartition, cap: int) -> EvidencePartition:
    """Rank both sides by weight and truncate them to a common size.

    The common size is min(|supporting|, |refuting|, cap). If either side is
    empty there is nothing to debate and OneSidedEvidence is raised.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    supporting = sorted(partition.supporting, key=_rank_key)
    refuting = sorted(partition.refuting, key=_rank_key)
    size = min(len(supporting), len(refuting), cap)
    if size == 0:
        raise OneSidedEvidence(
            f"cannot balance evidence: {len(supporting)} supporting vs"
            f" {len(refuting)} refuting articles"
        )
    return EvidencePartition(
        supporting=tuple(supporting[:size]), refuting=tuple(refuting[:size])
    )


def _collapse_ws(text: str) -> str:
    return " ".join(text.split())


def extract_passages(article: Article, claim: Claim, stance: Stance,
                     gateway) -> list[Passage]:
    """Ask for verbatim quotes; quotes not found in the body are dropped."""
    reply = gateway.structured(
        TemplateId.EXTRACT_PASSAGES,
        {
            "claim": claim.text,
            "stance": stance.value,
            "article_url": article.url,
            "article_title": article.title,
            "article_body": article.body,
        },
    )
    body = _collapse_ws(article.body)
    passages: list[Passage] = []
    for text, reason in reply.fields["passages"]:
        collapsed = _collapse_ws(text)
        if not collapsed or collapsed not in body:
            logger.warning("passage not found verbatim in %s, dropped", article.url)
            continue
        passages.append(Passage(url=article.url, text=text, reason=reason))
    return passages


def build_evidence_briefs(partition: EvidencePartition,
                          passages: Mapping[str, Sequence[Passage]]
                          ) -> tuple[EvidenceBrief, EvidenceBrief]:
    """Render both briefs from a balanced partition and its passages.

    The text layout is deterministic: articles in partition order, each under
    a numbered URL header, each passage quoted with its reason on the next
    line (omitted when the reason is empty).
    """
    if not partition.is_balanced:
        raise ValueError("briefs require a balanced partition")
    briefs: list[EvidenceBrief] = []
    for stance in (Stance.SUPPORT, Stance.REFUTE):
        side = partition.side(stance)
        lines = [f"Evidence {_SIDE_LABEL[stance]} the claim, strongest first:"]
        collected: list[Passage] = []
        for position, (article, _) in enumerate(side, 1):
            article_passages = list(passages.get(article.url, ()))
            if not article_passages:
                raise ValueError(f"no passages supplied for {article.url}")
            lines.append("")
            lines.append(f"[{position}] {article.url}")
            for passage in article_passages:
                if passage.url != article.url:
                    raise ValueError(
                        f"passage for {passage.url} attached to article {article.url}"
                    )
                lines.append(f'  - "{_collapse_ws(passage.text)}"')
                if passage.reason:
                    lines.append(f"    reason: {_collapse_ws(passage.reason)}")
                collected.append(passage)
        briefs.append(
            EvidenceBrief(
                stance=stance,
                passages=tuple(collected),
                concatenated="\n".join(lines),
            )
        )
    return briefs[0], briefs[1]


def prepare_evidence(assessments: Sequence[ArticleAssessment],
                     articles: Sequence[Article], claim: Claim, cap: int,
                     gateway) -> PreparedEvidence:
    """Full evidence prep: partition, rank, extract passages, balance, render.

    An article whose passage extraction fails (malformed reply or nothing
    verbatim) is replaced by the next-ranked candidate on the same side; if a
    side runs out of candidates both sides shrink to stay equal. Losing both
    sides entirely raises OneSidedEvidence.
    """
    partition = partition_evidence(assessments, articles)
    # rank_and_balance proves both sides are non-empty and fixes the target size
    target = len(rank_and_balance(partition, cap).supporting)
    events: list[PrepEvent] = []

    def fill(stance: Stance) -> list[tuple[tuple[Article, ArticleAssessment], list[Passage]]]:
        kept: list[tuple[tuple[Article, ArticleAssessment], list[Passage]]] = []
        for member in sorted(partition.side(stance), key=_rank_key):
            if len(kept) == target:
                break
            article, _ = member
            try:
                found = extract_passages(article, claim, stance, gateway)
            except MalformedResponse as exc:
                events.append(PrepEvent("passage_extraction_failed", article.url, str(exc)))
                continue
            if not found:
                events.append(PrepEvent("no_verbatim_passages", article.url, ""))
                continue
            kept.append((member, found))
        return kept

    supporting = fill(Stance.SUPPORT)
    refuting = fill(Stance.REFUTE)
    size = min(len(supporting), len(refuting))
    if size == 0:
        raise OneSidedEvidence(
            "no balanced evidence survived passage extraction:"
            f" {len(supporting)} supporting vs {len(refuting)} refuting"
        )
    for side in (supporting, refuting):
        for member, _ in side[size:]:
            events.append(PrepEvent("rebalanced_out", member[0].url, ""))
    supporting, refuting = supporting[:size], refuting[:size]

    balanced = EvidencePartition(
        supporting=tuple(member for member, _ in supporting),
        refuting=tuple(member for member, _ in refuting),
    )
    passage_map = {
        member[0].url: tuple(found) for member, found in supporting + refuting
    }
    briefs = build_evidence_briefs(balanced, passage_map)
    return PreparedEvidence(
        partition=balanced,
        briefs=briefs,
        passages=passage_map,
        events=tuple(events),
    )
