"""Agreement scoring and the stage-1 decision gate.

The score is the relevance-and-weight weighted mean of per-article verdict
signs:

    sigma = sum(r * w * v) / sum(r * w)

computed in exact rational arithmetic. Articles with r == 0 or w == 0
contribute nothing to either sum; if the denominator is zero the score is
undefined and ZeroNormalizer is raised. The gate compares sigma against the
threshold tau with inclusive boundaries: sigma == tau supports, sigma == -tau
refutes, anything strictly between escalates to debate.
"""

from __future__ import annotations

from enum import Enum
from fractions import Fraction
from typing import Sequence

from claimarbiter.core import AgreementScore, ArticleAssessment, exact_fraction
from claimarbiter.errors import ZeroNormalizer


class Stage1Decision(Enum):
    SUPPORT = "support"
    REFUTE = "refute"
    ESCALATE = "escalate"


def score_terms(assessments: Sequence[ArticleAssessment]) -> list[tuple[str, int, int, int, int]]:
    """Per-article contribution rows (url, r, w, v, r*w*v) for audit output."""
    return [
        (a.article_ref, a.relevance, a.weight, a.verdict, a.relevance * a.weight * a.verdict)
        for a in assessments
    ]


def agreement_score(assessments: Sequence[ArticleAssessment]) -> AgreementScore:
    """Compute the agreement score over a non-empty assessment list."""
    if not assessments:
        raise ValueError("assessments must be non-empty")
    normalizer = sum(a.relevance * a.weight for a in assessments)
    if normalizer == 0:
        raise ZeroNormalizer(
            "agreement score undefined: no article is both relevant and weighted"
        )
    numerator = sum(a.relevance * a.weight * a.verdict for a in assessments)
    contributing = sum(1 for a in assessments if a.relevance * a.weight > 0)
    return AgreementScore(
        sigma=Fraction(numerator, normalizer),
        normalizer_z=Fraction(normalizer),
        contributing_count=contributing,
    )


def stage1_decision(score: AgreementScore, tau) -> Stage1Decision:
    """Gate a score at threshold tau; both boundaries are inclusive."""
    threshold = exact_fraction(tau)
    if not 0 < threshold <= 1:
        raise ValueError(f"tau must lie in (0, 1], got {threshold}")
    if score.sigma >= threshold:
        return Stage1Decision.SUPPORT
    if score.sigma <= -threshold:
        return Stage1Decision.REFUTE
    return Stage1Decision.ESCALATE
