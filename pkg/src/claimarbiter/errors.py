"""Exception hierarchy for the verification pipeline.

Errors split into two families. Subclasses of UnverifiableError mean a single
claim cannot be decided honestly; the pipeline turns them into an Unverifiable
verdict record instead of guessing. Everything else is an operational problem
(bad config, unreachable backend, broken replay store) that the caller should
see directly.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class GatewayError(PipelineError):
    """Base class for model-gateway failures."""


class BackendUnreachable(GatewayError):
    """Live completion endpoint failed after all transport retries."""


class CassetteMiss(GatewayError):
    """Replay store has no response for a request fingerprint.

    A miss means the prompt being replayed was not the prompt recorded, which
    signals non-deterministic prompt construction. It is deliberately fatal.
    """


class PolicyMiss(GatewayError):
    """Scripted policy table has no response for a template; a test bug."""


class MalformedResponse(GatewayError):
    """Model response had no parseable structured block, or failed schema checks."""


class ProviderUnreachable(PipelineError):
    """Search provider failed after all transport retries."""


class ZeroNormalizer(PipelineError):
    """Agreement score undefined: no article is both relevant and weighted."""


class UnverifiableError(PipelineError):
    """A claim-level failure; the claim ends Unverifiable, the run continues."""


class EntityExtractionFailed(UnverifiableError):
    """Could not obtain the required number of distinct claim entities."""


class QueryGenerationFailed(UnverifiableError):
    """Could not obtain any usable search query for a claim."""


class NoArticlesFound(UnverifiableError):
    """Every search query came back empty."""


class AllArticlesUnassessable(UnverifiableError):
    """Every retrieved article was dropped during assessment."""


class OneSidedEvidence(UnverifiableError):
    """Debate requested but one side has no eligible evidence."""


class DebateAborted(UnverifiableError):
    """An agent response stayed malformed after retry; debate cannot proceed.

    Carries the transcript accumulated before the abort so the audit trail
    keeps the partial debate.
    """

    def __init__(self, message: str, transcript: tuple = ()):
        super().__init__(message)
        self.transcript = tuple(transcript)


class SchemaError(PipelineError):
    """Dataset row or serialized record violates the expected schema."""


class EmptyDataset(PipelineError):
    """Dataset file contains no claims."""


class UnknownClaimId(PipelineError):
    """A prediction references a claim id absent from the gold dataset."""
