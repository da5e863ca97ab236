"""claimarbiter: two-stage verification of health claims against web evidence.

Stage 1 scores the agreement of retrieved articles with the claim and decides
clear-cut cases at a threshold gate. Contested cases escalate to stage 2, a
structured debate between a supporting and a refuting advocate in front of a
judge. Every run produces an auditable verdict record; swapping the live
model and search backends for replay cassettes and fixture corpora makes the
whole pipeline deterministic.
"""

from claimarbiter.core import (
    AgreementScore,
    Article,
    ArticleAssessment,
    AttributeName,
    Claim,
    EntitySet,
    JudgeSignal,
    PipelineConfig,
    Query,
    Stance,
    exact_fraction,
    normalize_url,
    sign_stance,
    stance_sign,
)
from claimarbiter.gateway import (
    ClaimSession,
    LiveBackend,
    LlmGateway,
    ReplayBackend,
    ScriptedBackend,
)
from claimarbiter.pipeline import (
    DecisionStage,
    VerdictRecord,
    verify_batch,
    verify_claim,
)
from claimarbiter.retrieval import FixtureSearchProvider, LiveSearchProvider
from claimarbiter.evaluation import (
    LabeledDataset,
    MetricReport,
    coverage_stats,
    evaluate_records,
    load_dataset,
    macro_metrics,
)

__version__ = "0.1.0"

__all__ = [
    "AgreementScore",
    "Article",
    "ArticleAssessment",
    "AttributeName",
    "Claim",
    "ClaimSession",
    "DecisionStage",
    "EntitySet",
    "FixtureSearchProvider",
    "JudgeSignal",
    "LabeledDataset",
    "LiveBackend",
    "LiveSearchProvider",
    "LlmGateway",
    "MetricReport",
    "PipelineConfig",
    "Query",
    "ReplayBackend",
    "ScriptedBackend",
    "Stance",
    "VerdictRecord",
    "coverage_stats",
    "evaluate_records",
    "exact_fraction",
    "load_dataset",
    "macro_metrics",
    "normalize_url",
    "sign_stance",
    "stance_sign",
    "verify_batch",
    "verify_claim",
]
