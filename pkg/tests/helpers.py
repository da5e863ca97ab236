"""Shared test utilities: response builders and the synthetic claim corpus.

The corpus is twelve hand-constructed claims with known article assessments,
judge scripts, and hand-derived expected outcomes:

    c01..c03  decided at stage 1 as support (sigma 1, 4/5, 5/7)
    c04..c06  decided at stage 1 as refute  (sigma -1, -4/5, -5/7)
    c07..c10  escalate to debate (judge decides in rounds 1, 2, 3 and at the
              forced round-5 cap respectively)
    c11       zero normalizer, decided by the fallback debate path
    c12       zero normalizer with no relevant article at all: unverifiable

Stage-1 scenarios still carry a one-line judge script so the same corpus can
be run at a higher gate threshold, where they escalate too.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from claimarbiter.core import ArticleAssessment, AttributeName, Claim, Stance
from claimarbiter.gateway import LlmGateway, ScriptedBackend
from claimarbiter.prompts import TemplateId
from claimarbiter.retrieval import body_fixture_path, query_fixture_path

ATTRIBUTE_ORDER = [
    "problem_statement",
    "experimental_setup",
    "findings",
    "statistical_significance",
    "limitations",
    "results",
]


def attrs_for_weight(weight: int) -> list[str]:
    return ATTRIBUTE_ORDER[:weight]


def entities_json(*entities: str) -> str:
    return json.dumps({"entities": list(entities)})


def queries_json(*queries: str) -> str:
    return json.dumps({"queries": list(queries)})


def assessment_json(relevance: int, attributes: list[str], verdict: str) -> str:
    return json.dumps({"relevance": relevance, "attributes": attributes, "verdict": verdict})


def passages_json(*pairs: tuple[str, str]) -> str:
    return json.dumps(
        {"passages": [{"passage": passage, "reason": reason} for passage, reason in pairs]}
    )


def statement_json(text: str) -> str:
    return json.dumps({"statement": text})


def judge_json(decision: str, rationale: str = "weighed the round") -> str:
    return json.dumps({"decision": decision, "rationale": rationale})


def make_assessment(url: str = "https://example.org/a", relevance: int = 1,
                    weight: int = 0, verdict: int = 1, ref: str = "") -> ArticleAssessment:
    attributes = frozenset(AttributeName(name) for name in attrs_for_weight(weight))
    return ArticleAssessment(
        article_ref=url,
        relevance=relevance,
        weight=weight,
        verdict=verdict,
        attributes_found=attributes,
        raw_response_ref=ref,
    )


def scripted_gateway(policies: dict, **kwargs) -> LlmGateway:
    return LlmGateway(ScriptedBackend(policies), **kwargs)


def long_body(seed: str) -> str:
    return (f"Evidence report {seed} documents the cohort in detail. " * 8).strip()


def write_query_fixture(root: Path, text: str, results: list[tuple[str, str]]) -> Path:
    path = query_fixture_path(root, text)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps([{"url": url, "title": title, "snippet": ""} for url, title in results]),
        encoding="utf-8",
    )
    return path


def write_body_fixture(root: Path, url: str, body: str) -> Path:
    path = body_fixture_path(root, url)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(body, encoding="utf-8")
    return path


# ----------------------------------------------------------------------------
# the twelve-claim corpus


@dataclass(frozen=True)
class ArticleSpec:
    key: str
    weight: int
    verdict: str
    relevance: int = 1


@dataclass(frozen=True)
class ClaimScenario:
    cid: str
    gold: str
    articles: tuple[ArticleSpec, ...]
    judge_script: tuple[str, ...] = ()
    judge_forced_script: tuple[str, ...] = ()
    expected_verdict: str | None = None
    expected_stage: str | None = None
    expected_rounds: int | None = None
    expected_forced: bool | None = None
    expected_sigma: Fraction | None = None

    @property
    def text(self) -> str:
        return (
            f"Synthetic health claim {self.cid}: intervention {self.cid}"
            " improves the tracked outcome."
        )

    @property
    def claim(self) -> Claim:
        return Claim(id=self.cid, text=self.text, gold_label=Stance(self.gold))

    def queries(self) -> list[str]:
        return [f"{self.cid} evidence angle {index}" for index in range(1, 6)]


def article_url(cid: str, key: str) -> str:
    return f"https://example.org/{cid}/{key}"


def article_body(cid: str, key: str) -> str:
    filler = (
        f"Longitudinal analysis {key} examines intervention {cid} against the"
        " tracked outcome in a registered cohort with pre-specified endpoints. "
    ) * 3
    closing = (
        f"The {key} cohort analysis for intervention {cid} reported a consistent"
        " measurable effect on the tracked outcome."
    )
    return filler + closing


def corpus_scenarios() -> tuple[ClaimScenario, ...]:
    stage1_judge = ("support",)
    return (
        ClaimScenario(
            "c01", "support",
            (ArticleSpec("a1", 6, "support"), ArticleSpec("a2", 5, "support"),
             ArticleSpec("a3", 4, "support")),
            judge_script=stage1_judge, judge_forced_script=("support",),
            expected_verdict="support", expected_stage="stage1",
            expected_sigma=Fraction(1),
        ),
        ClaimScenario(
            "c02", "support",
            (ArticleSpec("a1", 6, "support"), ArticleSpec("a2", 3, "support"),
             ArticleSpec("a3", 1, "refute")),
            judge_script=stage1_judge, judge_forced_script=("support",),
            expected_verdict="support", expected_stage="stage1",
            expected_sigma=Fraction(4, 5),
        ),
        ClaimScenario(
            "c03", "support",
            (ArticleSpec("a1", 6, "support"), ArticleSpec("a2", 6, "support"),
             ArticleSpec("a3", 2, "refute")),
            judge_script=stage1_judge, judge_forced_script=("support",),
            expected_verdict="support", expected_stage="stage1",
            expected_sigma=Fraction(5, 7),
        ),
        ClaimScenario(
            "c04", "refute",
            (ArticleSpec("a1", 6, "refute"), ArticleSpec("a2", 5, "refute"),
             ArticleSpec("a3", 4, "refute")),
            judge_script=("refute",), judge_forced_script=("refute",),
            expected_verdict="refute", expected_stage="stage1",
            expected_sigma=Fraction(-1),
        ),
        ClaimScenario(
            "c05", "refute",
            (ArticleSpec("a1", 6, "refute"), ArticleSpec("a2", 3, "refute"),
             ArticleSpec("a3", 1, "support")),
            judge_script=("refute",), judge_forced_script=("refute",),
            expected_verdict="refute", expected_stage="stage1",
            expected_sigma=Fraction(-4, 5),
        ),
        ClaimScenario(
            "c06", "refute",
            (ArticleSpec("a1", 6, "refute"), ArticleSpec("a2", 6, "refute"),
             ArticleSpec("a3", 2, "support")),
            judge_script=("refute",), judge_forced_script=("refute",),
            expected_verdict="refute", expected_stage="stage1",
            expected_sigma=Fraction(-5, 7),
        ),
        ClaimScenario(
            "c07", "support",
            (ArticleSpec("a1", 4, "support"), ArticleSpec("a2", 2, "refute")),
            judge_script=("support",),
            expected_verdict="support", expected_stage="stage2",
            expected_rounds=1, expected_forced=False, expected_sigma=Fraction(1, 3),
        ),
        ClaimScenario(
            "c08", "refute",
            (ArticleSpec("a1", 3, "support"), ArticleSpec("a2", 4, "refute")),
            judge_script=("continue", "refute"),
            expected_verdict="refute", expected_stage="stage2",
            expected_rounds=2, expected_forced=False, expected_sigma=Fraction(-1, 7),
        ),
        ClaimScenario(
            "c09", "support",
            (ArticleSpec("a1", 5, "support"), ArticleSpec("a2", 5, "refute")),
            judge_script=("continue", "continue", "support"),
            expected_verdict="support", expected_stage="stage2",
            expected_rounds=3, expected_forced=False, expected_sigma=Fraction(0),
        ),
        ClaimScenario(
            "c10", "refute",
            (ArticleSpec("a1", 2, "support"), ArticleSpec("a2", 3, "refute")),
            judge_script=("continue", "continue", "continue", "continue"),
            judge_forced_script=("refute",),
            expected_verdict="refute", expected_stage="stage2",
            expected_rounds=5, expected_forced=True, expected_sigma=Fraction(-1, 5),
        ),
        ClaimScenario(
            "c11", "support",
            (ArticleSpec("a1", 0, "support"), ArticleSpec("a2", 0, "refute")),
            judge_script=("support",),
            expected_verdict="support", expected_stage="fallback",
            expected_rounds=1, expected_forced=False, expected_sigma=None,
        ),
        ClaimScenario(
            "c12", "support",
            (ArticleSpec("a1", 5, "support", relevance=0),
             ArticleSpec("a2", 3, "refute", relevance=0)),
            expected_verdict=None, expected_stage=None, expected_sigma=None,
        ),
    )


def write_search_fixtures(root: Path, scenarios) -> Path:
    for scenario in scenarios:
        queries = scenario.queries()
        results = [
            (article_url(scenario.cid, spec.key), f"{scenario.cid} report {spec.key}")
            for spec in scenario.articles
        ]
        write_query_fixture(root, queries[0], results)
        for query in queries[1:]:
            write_query_fixture(root, query, [])
        for spec in scenario.articles:
            url = article_url(scenario.cid, spec.key)
            write_body_fixture(root, url, article_body(scenario.cid, spec.key))
    return root


def corpus_policies(scenarios) -> dict:
    """Fresh scripted policies for one corpus run; judge scripts are stateful."""
    by_text = {scenario.text: scenario for scenario in scenarios}
    by_url = {
        article_url(scenario.cid, spec.key): spec
        for scenario in scenarios
        for spec in scenario.articles
    }
    judge_rounds = {scenario.text: list(scenario.judge_script) for scenario in scenarios}
    judge_forced = {
        scenario.text: list(scenario.judge_forced_script) for scenario in scenarios
    }

    def extract_entities(variables):
        scenario = by_text[variables["claim"]]
        return entities_json(f"intervention {scenario.cid}", "tracked outcome")

    def generate_queries(variables):
        scenario = by_text[variables["claim"]]
        return queries_json(*scenario.queries())

    def assess_article(variables):
        spec = by_url[variables["article_url"]]
        return assessment_json(spec.relevance, attrs_for_weight(spec.weight), spec.verdict)

    def extract_passages(variables):
        return passages_json(
            (variables["article_body"][-110:], "directly addresses the claim")
        )

    def advocate_statement(variables):
        return statement_json(
            f"As the {variables['stance']} advocate: the quoted evidence decides this claim."
        )

    def judge_round(variables):
        queue = judge_rounds[variables["claim"]]
        if not queue:
            raise KeyError("judge round script exhausted")
        return judge_json(queue.pop(0))

    def judge_forced_verdict(variables):
        queue = judge_forced[variables["claim"]]
        if not queue:
            raise KeyError("judge forced script exhausted")
        return judge_json(queue.pop(0))

    return {
        TemplateId.EXTRACT_ENTITIES: extract_entities,
        TemplateId.GENERATE_QUERIES: generate_queries,
        TemplateId.ASSESS_ARTICLE: assess_article,
        TemplateId.EXTRACT_PASSAGES: extract_passages,
        TemplateId.OPENING_STATEMENT: advocate_statement,
        TemplateId.REBUTTAL: advocate_statement,
        TemplateId.JUDGE_ROUND: judge_round,
        TemplateId.JUDGE_FORCED_VERDICT: judge_forced_verdict,
    }


def write_dataset(path: Path, scenarios) -> Path:
    rows = [
        json.dumps({"id": scenario.cid, "claim": scenario.text, "label": scenario.gold})
        for scenario in scenarios
    ]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


def gate_decision(record) -> str | None:
    """The gate outcome recorded in a verdict record's audit trail, if any."""
    for event in record.audit:
        if event.kind == "gate":
            return event.data["decision"]
    return None
