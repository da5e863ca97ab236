"""Core domain vocabulary shared by every pipeline stage.

Scores and thresholds are kept as exact rationals (fractions.Fraction) so
that gate comparisons never depend on float rounding; values become floats
only at reporting boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from urllib.parse import parse_qsl, urlencode, urlsplit, urlunsplit


class Stance(Enum):
    """Binary stance of an article or a verdict toward a claim."""

    SUPPORT = "support"
    REFUTE = "refute"


_SIGN_BY_STANCE = {Stance.SUPPORT: 1, Stance.REFUTE: -1}
_STANCE_BY_SIGN = {sign: stance for stance, sign in _SIGN_BY_STANCE.items()}


def stance_sign(stance: Stance) -> int:
    """Map a stance to its verdict sign: +1 for support, -1 for refute."""
    return _SIGN_BY_STANCE[stance]


def sign_stance(sign: int) -> Stance:
    """Inverse of stance_sign; defined exactly on {-1, +1}."""
    try:
        return _STANCE_BY_SIGN[sign]
    except KeyError:
        raise ValueError(f"verdict sign must be -1 or +1, got {sign!r}") from None


class JudgeSignal(Enum):
    """Per-round outcome from the debate judge."""

    SUPPORT = "support"
    REFUTE = "refute"
    CONTINUE = "continue"


class AttributeName(Enum):
    """The six structural attributes that determine an article's weight."""

    PROBLEM_STATEMENT = "problem_statement"
    EXPERIMENTAL_SETUP = "experimental_setup"
    FINDINGS = "findings"
    STATISTICAL_SIGNIFICANCE = "statistical_significance"
    LIMITATIONS = "limitations"
    RESULTS = "results"


def exact_fraction(value: int | float | str | Fraction) -> Fraction:
    """Coerce a value to an exact rational.

    Floats are converted through their shortest decimal repr, so
    exact_fraction(0.7) == Fraction(7, 10) rather than the binary expansion
    of the float. Strings accept both "0.7" and "7/10" forms.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not valid rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot coerce {type(value).__name__} to Fraction")


# Query parameters that vary per visitor, not per document. Stripping them
# keeps one article from being counted twice under different share links.
_TRACKER_PARAMS = frozenset(
    {"fbclid", "gclid", "msclkid", "mc_cid", "mc_eid", "igshid", "ref", "ref_src"}
)
_TRACKER_PREFIXES = ("utm_",)


def _is_tracker_param(name: str) -> bool:
    lowered = name.lower()
    return lowered in _TRACKER_PARAMS or lowered.startswith(_TRACKER_PREFIXES)


def normalize_url(url: str) -> str:
    """Canonicalize a URL for deduplication.

    Lowercases scheme and host, drops the fragment and tracker query
    parameters, and strips trailing slashes from the path. Idempotent.
    """
    parts = urlsplit(url.strip())
    query = urlencode(
        [
            (name, value)
            for name, value in parse_qsl(parts.query, keep_blank_values=True)
            if not _is_tracker_param(name)
        ]
    )
    return urlunsplit(
        (parts.scheme.lower(), parts.netloc.lower(), parts.path.rstrip("/"), query, "")
    )


@dataclass(frozen=True)
class Claim:
    """A checkable health claim. gold_label is set only on labeled datasets."""

    id: str
    text: str
    gold_label: Stance | None = None

    def __post_init__(self):
        if not self.id or not self.id.strip():
            raise ValueError("claim id must be non-empty")
        if not self.text or not self.text.strip():
            raise ValueError("claim text must be non-empty")


@dataclass(frozen=True)
class EntitySet:
    """Ordered key entities of a claim; relevance requires matching all of them."""

    entities: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "entities", tuple(self.entities))
        if not self.entities:
            raise ValueError("entity set must contain at least one entity")
        seen: set[str] = set()
        for entity in self.entities:
            if not entity or not entity.strip():
                raise ValueError("entities must be non-empty strings")
            key = entity.casefold()
            if key in seen:
                raise ValueError(f"duplicate entity (case-insensitive): {entity!r}")
            seen.add(key)

    def __iter__(self):
        return iter(self.entities)

    def __len__(self) -> int:
        return len(self.entities)


@dataclass(frozen=True)
class Query:
    """A single search query with its position in the generated query list."""

    text: str
    origin_rank: int

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError("query text must be non-empty")
        if self.origin_rank < 0:
            raise ValueError("origin_rank must be >= 0")


@dataclass(frozen=True)
class Article:
    """A retrieved article; the normalized URL is its identity.

    source_queries holds the origin ranks of every query whose result list
    surfaced this URL during selection.
    """

    url: str
    title: str
    body: str
    source_queries: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.url or not self.url.strip():
            raise ValueError("article url must be non-empty")
        object.__setattr__(self, "url", normalize_url(self.url))
        object.__setattr__(self, "source_queries", frozenset(self.source_queries))


@dataclass(frozen=True)
class ArticleAssessment:
    """Per-article relevance, weight and verdict relative to one claim.

    weight is definitionally the number of structural attributes found; the
    constructor rejects any other pairing so the two can never drift apart.
    """

    article_ref: str
    relevance: int
    weight: int
    verdict: int
    attributes_found: frozenset[AttributeName] = field(default_factory=frozenset)
    raw_response_ref: str = ""

    def __post_init__(self):
        object.__setattr__(self, "attributes_found", frozenset(self.attributes_found))
        if self.relevance not in (0, 1):
            raise ValueError(f"relevance must be 0 or 1, got {self.relevance!r}")
        if self.verdict not in (-1, 1):
            raise ValueError(f"verdict must be -1 or +1, got {self.verdict!r}")
        for attribute in self.attributes_found:
            if not isinstance(attribute, AttributeName):
                raise ValueError(f"attributes_found must hold AttributeName, got {attribute!r}")
        if self.weight != len(self.attributes_found):
            raise ValueError(
                f"weight {self.weight} != |attributes_found| {len(self.attributes_found)}"
            )

    @property
    def stance(self) -> Stance:
        return sign_stance(self.verdict)


@dataclass(frozen=True)
class AgreementScore:
    """Normalized weighted agreement over a set of assessments.

    Cannot exist with a zero normalizer; that case raises ZeroNormalizer at
    the scoring call site instead.
    """

    sigma: Fraction
    normalizer_z: Fraction
    contributing_count: int

    def __post_init__(self):
        object.__setattr__(self, "sigma", exact_fraction(self.sigma))
        object.__setattr__(self, "normalizer_z", exact_fraction(self.normalizer_z))
        if self.normalizer_z <= 0:
            raise ValueError("normalizer_z must be positive")
        if not -1 <= self.sigma <= 1:
            raise ValueError(f"sigma must lie in [-1, 1], got {self.sigma}")
        if self.contributing_count < 0:
            raise ValueError("contributing_count must be >= 0")


@dataclass(frozen=True)
class PipelineConfig:
    """Operating parameters for a verification run."""

    entity_count: int = 2
    query_count: int = 5
    article_count: int = 10
    tau: Fraction = Fraction(7, 10)
    max_rounds: int = 5
    evidence_cap_per_side: int = 3

    def __post_init__(self):
        object.__setattr__(self, "tau", exact_fraction(self.tau))
        for name in ("entity_count", "query_count", "article_count", "max_rounds",
                     "evidence_cap_per_side"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 < self.tau <= 1:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")

    def as_dict(self) -> dict:
        """Serializable echo of the effective configuration."""
        return {
            "entity_count": self.entity_count,
            "query_count": self.query_count,
            "article_count": self.article_count,
            "tau": str(self.tau),
            "max_rounds": self.max_rounds,
            "evidence_cap_per_side": self.evidence_cap_per_side,
        }
