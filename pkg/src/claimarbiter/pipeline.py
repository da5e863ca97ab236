"""End-to-end claim verification and the auditable verdict record.

verify_claim runs the full path: entities, queries, retrieval, per-article
assessment, agreement score, gate, and (when the gate escalates) the debate.
Every model call fingerprint, every dropped article, and every debate event
lands exactly once in the record's audit trail, so a verdict can always be
explained after the fact.

A claim the pipeline cannot decide honestly ends Unverifiable: the record
carries a reason instead of a verdict, never a guess. A zero score
normalizer is not itself fatal; if the relevant articles still split into
both stances the claim goes straight to debate with decided_by marked as
the fallback path.

Determinism: with a replay or scripted gateway and a fixture search
provider, records are timestamped from a per-claim logical clock, so two
runs over the same inputs produce byte-identical serialized records.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence

from claimarbiter.assessment import assess_all
from claimarbiter.core import Claim, PipelineConfig, Stance, exact_fraction
from claimarbiter.debate import JudgeDecision, Statement, run_debate
from claimarbiter.errors import SchemaError, UnverifiableError, ZeroNormalizer
from claimarbiter.evidence import prepare_evidence
from claimarbiter.gateway import LlmGateway
from claimarbiter.retrieval import extract_entities, generate_queries, retrieve_articles
from claimarbiter.scoring import Stage1Decision, agreement_score, score_terms, stage1_decision

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class DecisionStage(Enum):
    STAGE1 = "stage1"
    STAGE2 = "stage2"
    FALLBACK = "fallback"


class TickClock:
    """Logical clock: 0, 1, 2, ... per claim, for reproducible records."""

    def __init__(self):
        self._tick = 0

    def now(self) -> int:
        tick = self._tick
        self._tick += 1
        return tick


class SystemClock:
    """Wall-clock timestamps for live runs."""

    def now(self) -> float:
        return time.time()


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    at: int | float
    kind: str
    data: dict


class _AuditTrail:
    def __init__(self, clock):
        self._clock = clock
        self._events: list[AuditEvent] = []

    def add(self, kind: str, **data) -> None:
        self._events.append(
            AuditEvent(seq=len(self._events), at=self._clock.now(), kind=kind, data=data)
        )

    def events(self) -> tuple[AuditEvent, ...]:
        return tuple(self._events)


@dataclass(frozen=True)
class VerdictRecord:
    """The final, serializable outcome of verifying one claim."""

    claim_id: str
    claim_text: str
    verdict: Stance | None
    decided_by: DecisionStage | None
    unverifiable_reason: str | None
    sigma: Fraction | None
    normalizer_z: Fraction | None
    rounds_used: int | None
    forced: bool | None
    config: dict
    audit: tuple[AuditEvent, ...]
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if (self.verdict is None) == (self.unverifiable_reason is None):
            raise ValueError("record must carry exactly one of verdict / unverifiable_reason")
        if self.verdict is not None and self.decided_by is None:
            raise ValueError("a decided record must name its deciding stage")

    @property
    def is_unverifiable(self) -> bool:
        return self.verdict is None

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "claim_id": self.claim_id,
            "claim_text": self.claim_text,
            "verdict": self.verdict.value if self.verdict else None,
            "decided_by": self.decided_by.value if self.decided_by else None,
            "unverifiable_reason": self.unverifiable_reason,
            "sigma": str(self.sigma) if self.sigma is not None else None,
            "normalizer_z": str(self.normalizer_z) if self.normalizer_z is not None else None,
            "rounds_used": self.rounds_used,
            "forced": self.forced,
            "config": dict(self.config),
            "audit": [
                {"seq": event.seq, "at": event.at, "kind": event.kind, "data": event.data}
                for event in self.audit
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "VerdictRecord":
        try:
            version = data["schema_version"]
        except (TypeError, KeyError):
            raise SchemaError("record has no schema_version field")
        if version != SCHEMA_VERSION:
            raise SchemaError(
                f"record schema version {version!r} is not supported (expected {SCHEMA_VERSION})"
            )
        try:
            return cls(
                claim_id=data["claim_id"],
                claim_text=data["claim_text"],
                verdict=Stance(data["verdict"]) if data["verdict"] else None,
                decided_by=DecisionStage(data["decided_by"]) if data["decided_by"] else None,
                unverifiable_reason=data["unverifiable_reason"],
                sigma=exact_fraction(data["sigma"]) if data["sigma"] is not None else None,
                normalizer_z=(
                    exact_fraction(data["normalizer_z"])
                    if data["normalizer_z"] is not None else None
                ),
                rounds_used=data["rounds_used"],
                forced=data["forced"],
                config=data.get("config", {}),
                audit=tuple(
                    AuditEvent(seq=event["seq"], at=event["at"], kind=event["kind"],
                               data=event.get("data", {}))
                    for event in data.get("audit", [])
                ),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"unreadable verdict record: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "VerdictRecord":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"record is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def default_clock(gateway, provider):
    """Logical ticks when the whole stack is deterministic, else wall clock."""
    if getattr(gateway, "deterministic", False) and getattr(provider, "deterministic", False):
        return TickClock()
    return SystemClock()


def _audit_debate_event(audit: _AuditTrail, event) -> None:
    if isinstance(event, Statement):
        audit.add(
            "statement",
            round=event.round,
            author=event.author.value,
            text=event.text,
            ref=event.raw_response_ref,
        )
    elif isinstance(event, JudgeDecision):
        audit.add(
            "judge_decision",
            round=event.round,
            outcome=event.outcome.value,
            forced=event.forced,
            rationale=event.rationale,
            ref=event.raw_response_ref,
        )


def verify_claim(claim: Claim, cfg: PipelineConfig, gateway: LlmGateway, provider,
                 *, stage1_only: bool = False, clock=None,
                 assess_workers: int = 1) -> VerdictRecord:
    """Verify one claim end to end; never raises for claim-level failures."""
    audit = _AuditTrail(clock if clock is not None else default_clock(gateway, provider))
    session = gateway.session(
        on_call=lambda call: audit.add(
            "llm_call", template=call.template_id, digest=call.digest,
            attempt=call.attempt, ok=call.ok,
        )
    )
    config_echo = cfg.as_dict()

    def record(*, verdict=None, decided_by=None, reason=None, sigma=None,
               normalizer_z=None, rounds_used=None, forced=None) -> VerdictRecord:
        return VerdictRecord(
            claim_id=claim.id,
            claim_text=claim.text,
            verdict=verdict,
            decided_by=decided_by,
            unverifiable_reason=reason,
            sigma=sigma,
            normalizer_z=normalizer_z,
            rounds_used=rounds_used,
            forced=forced,
            config=config_echo,
            audit=audit.events(),
        )

    def debate_path(assessments, articles, decided_by: DecisionStage,
                    sigma, normalizer_z) -> VerdictRecord:
        prepared = prepare_evidence(
            assessments, articles, claim, cfg.evidence_cap_per_side, session
        )
        audit.add(
            "partition",
            supporting=[
                {"url": article.url, "weight": assessment.weight}
                for article, assessment in prepared.partition.supporting
            ],
            refuting=[
                {"url": article.url, "weight": assessment.weight}
                for article, assessment in prepared.partition.refuting
            ],
        )
        for event in prepared.events:
            audit.add("evidence_prep", step=event.kind, url=event.url, detail=event.detail)
        for brief in prepared.briefs:
            audit.add("brief", stance=brief.stance.value, text=brief.concatenated)
        outcome = run_debate(
            claim, prepared.partition, prepared.briefs, cfg, session, sigma=sigma
        )
        for event in outcome.transcript:
            _audit_debate_event(audit, event)
        return record(
            verdict=outcome.verdict,
            decided_by=decided_by,
            sigma=sigma,
            normalizer_z=normalizer_z,
            rounds_used=outcome.rounds_used,
            forced=outcome.forced,
        )

    try:
        entities = extract_entities(claim, cfg, session)
        audit.add("entities", entities=list(entities))

        queries = generate_queries(claim, entities, cfg, session)
        audit.add(
            "queries",
            queries=[{"text": query.text, "origin_rank": query.origin_rank}
                     for query in queries],
        )
        if len(queries) < cfg.query_count:
            audit.add("query_shortfall", requested=cfg.query_count, produced=len(queries))

        retrieval = retrieve_articles(queries, provider, cfg)
        for article in retrieval.articles:
            audit.add(
                "article",
                url=article.url,
                title=article.title,
                source_queries=sorted(article.source_queries),
                body_chars=len(article.body),
            )
        for url, reason in retrieval.dropped:
            audit.add("article_dropped", url=url, reason=reason)

        batch = assess_all(retrieval.articles, claim, entities, session,
                           max_workers=assess_workers)
        for assessment in batch.assessments:
            audit.add(
                "assessment",
                url=assessment.article_ref,
                relevance=assessment.relevance,
                weight=assessment.weight,
                verdict=assessment.verdict,
                attributes=sorted(attr.value for attr in assessment.attributes_found),
                ref=assessment.raw_response_ref,
            )
        for url, reason in batch.dropped:
            audit.add("article_dropped", url=url, reason=reason)

        try:
            score = agreement_score(batch.assessments)
        except ZeroNormalizer:
            audit.add("zero_normalizer")
            if stage1_only:
                return record(
                    reason="agreement score undefined and escalation disabled (stage1-only run)"
                )
            # fallback: debatable evidence may still exist among relevant articles
            return debate_path(
                batch.assessments, retrieval.articles, DecisionStage.FALLBACK,
                sigma=None, normalizer_z=Fraction(0),
            )

        audit.add(
            "score",
            sigma=str(score.sigma),
            normalizer_z=str(score.normalizer_z),
            contributing_count=score.contributing_count,
            terms=[
                {"url": url, "relevance": r, "weight": w, "verdict": v, "term": term}
                for url, r, w, v, term in score_terms(batch.assessments)
            ],
        )
        decision = stage1_decision(score, cfg.tau)
        audit.add("gate", tau=str(cfg.tau), decision=decision.value)

        if decision is Stage1Decision.SUPPORT:
            return record(verdict=Stance.SUPPORT, decided_by=DecisionStage.STAGE1,
                          sigma=score.sigma, normalizer_z=score.normalizer_z)
        if decision is Stage1Decision.REFUTE:
            return record(verdict=Stance.REFUTE, decided_by=DecisionStage.STAGE1,
                          sigma=score.sigma, normalizer_z=score.normalizer_z)

        if stage1_only:
            return record(
                reason="escalated at the gate but stage-2 debate is disabled",
                sigma=score.sigma, normalizer_z=score.normalizer_z,
            )
        return debate_path(
            batch.assessments, retrieval.articles, DecisionStage.STAGE2,
            sigma=score.sigma, normalizer_z=score.normalizer_z,
        )
    except UnverifiableError as exc:
        for event in getattr(exc, "transcript", ()):
            _audit_debate_event(audit, event)
        audit.add("unverifiable", error=type(exc).__name__, reason=str(exc))
        logger.info("claim %s unverifiable: %s", claim.id, exc)
        return record(reason=f"{type(exc).__name__}: {exc}")


def verify_batch(claims: Sequence[Claim], cfg: PipelineConfig, gateway: LlmGateway,
                 provider, *, jobs: int = 1, stage1_only: bool = False) -> list[VerdictRecord]:
    """Verify many claims; output order matches input order.

    Claim-level failures of any kind are isolated into Unverifiable records,
    one bad claim never aborts the batch.
    """
    ids = [claim.id for claim in claims]
    if len(set(ids)) != len(ids):
        raise ValueError("claim ids must be unique within a batch")

    def one(claim: Claim) -> VerdictRecord:
        try:
            return verify_claim(claim, cfg, gateway, provider, stage1_only=stage1_only)
        except Exception as exc:  # noqa: BLE001 - batch isolation is the contract
            logger.exception("claim %s failed", claim.id)
            return VerdictRecord(
                claim_id=claim.id,
                claim_text=claim.text,
                verdict=None,
                decided_by=None,
                unverifiable_reason=f"{type(exc).__name__}: {exc}",
                sigma=None,
                normalizer_z=None,
                rounds_used=None,
                forced=None,
                config=cfg.as_dict(),
                audit=(),
            )

    if jobs > 1 and len(claims) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            return list(executor.map(one, claims))
    return [one(claim) for claim in claims]
