"""Prompt templates for every model call the pipeline makes.

Each template asks for a single JSON object so responses stay machine
parseable. Rendering is a pure function of (template id, variables): the
same inputs always produce the same prompt text, which is what makes
request fingerprinting and replay possible. Extra variables that have no
placeholder are allowed; they do not change the rendered text but they do
change the request fingerprint, which is how retry attempts are kept
distinct in the replay store.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from enum import Enum


class TemplateId(Enum):
    EXTRACT_ENTITIES = "extract_entities"
    GENERATE_QUERIES = "generate_queries"
    ASSESS_ARTICLE = "assess_article"
    EXTRACT_PASSAGES = "extract_passages"
    OPENING_STATEMENT = "opening_statement"
    REBUTTAL = "rebuttal"
    JUDGE_ROUND = "judge_round"
    JUDGE_FORCED_VERDICT = "judge_forced_verdict"


TEMPLATES: dict[TemplateId, str] = {
    TemplateId.EXTRACT_ENTITIES: """\
You are helping verify a health claim.

Claim: {claim}

List the {entity_count} key entities this claim hinges on. Prefer the concrete
interventions, exposures, conditions, or outcomes named by the claim. Entities
must be distinct.{retry_note}

Respond with a single JSON object and nothing else:
{{"entities": ["<entity>", "..."]}}{format_reminder}""",
    TemplateId.GENERATE_QUERIES: """\
You are gathering evidence to verify a health claim.

Claim: {claim}
Key entities: {entities}

Write {query_count} distinct web search queries that would surface scientific
reporting on this claim. Vary the phrasing so the queries cover different
angles on the same question.{retry_note}

Respond with a single JSON object and nothing else:
{{"queries": ["<query>", "..."]}}{format_reminder}""",
    TemplateId.ASSESS_ARTICLE: """\
You are assessing one retrieved article for a health claim.

Claim: {claim}
Key entities: {entities}

Article URL: {article_url}
Article title: {article_title}
Article text:
{article_body}

Answer three questions about the article:
1. relevance: 1 if the article discusses ALL of the key entities, else 0.
2. attributes: which of these structural attributes the article contains.
   - problem_statement: states the question or problem the work addresses
   - experimental_setup: describes the study design, methods, cohort, or apparatus
   - findings: reports what was observed or discovered
   - statistical_significance: reports p-values, confidence intervals, or significance testing
   - limitations: acknowledges caveats, weaknesses, or open questions
   - results: presents measured outcomes or quantitative data
3. verdict: whether the article's content supports or refutes the claim.
   Answer "support" or "refute"; if the article leans only slightly, still
   pick the closer side. No other answer is accepted.

Respond with a single JSON object and nothing else:
{{"relevance": 0, "attributes": ["<attribute>", "..."], "verdict": "support"}}{format_reminder}""",
    TemplateId.EXTRACT_PASSAGES: """\
You are compiling evidence on the "{stance}" side of a health claim.

Claim: {claim}

Article URL: {article_url}
Article title: {article_title}
Article text:
{article_body}

Quote the passages from the article text that argue the "{stance}" side of
the claim. Each passage must be copied verbatim from the article text. For
each passage give a one-sentence reason it matters.

Respond with a single JSON object and nothing else:
{{"passages": [{{"passage": "<verbatim quote>", "reason": "<why it matters>"}}]}}{format_reminder}""",
    TemplateId.OPENING_STATEMENT: """\
You are the "{stance}" advocate in a structured debate about a health claim.
Argue only from the evidence brief below; do not invent sources.

Claim: {claim}

Evidence brief:
{brief}

Give your opening statement: the strongest case that the evidence falls on
the "{stance}" side of the claim, citing the brief's articles by URL.

Respond with a single JSON object and nothing else:
{{"statement": "<your opening statement>"}}{format_reminder}""",
    TemplateId.REBUTTAL: """\
You are the "{stance}" advocate in a structured debate about a health claim.{initiation}

Claim: {claim}

Your conversation history so far:
{history}

Your opponent's latest statement:
{opponent_statement}

Respond to your opponent: counter their strongest points and reinforce your
own case. Do not introduce evidence that is not already in the debate.

Respond with a single JSON object and nothing else:
{{"statement": "<your rebuttal>"}}{format_reminder}""",
    TemplateId.JUDGE_ROUND: """\
You are the judge of a structured debate about a health claim. Round {round}
of at most {max_rounds} has just concluded.

Claim: {claim}

Debate history:
{history}

Latest statement by the support advocate:
{support_statement}

Latest statement by the refute advocate:
{refute_statement}

Decide whether the arguments heard so far settle the claim. If one side's
case is now compelling, return its verdict; if genuine uncertainty remains,
return "continue" and the debate runs another round.

Respond with a single JSON object and nothing else:
{{"decision": "support", "rationale": "<one or two sentences>"}}
where "decision" is one of "support", "refute", "continue".{format_reminder}""",
    TemplateId.JUDGE_FORCED_VERDICT: """\
You are the judge of a structured debate about a health claim. The debate
has reached its round limit, so you must now deliver a verdict; "continue"
is no longer an option.

Claim: {claim}

Debate history:
{history}

Final statement by the support advocate:
{support_statement}

Final statement by the refute advocate:
{refute_statement}

Weigh the full debate and return the better-supported verdict.

Respond with a single JSON object and nothing else:
{{"decision": "support", "rationale": "<one or two sentences>"}}
where "decision" is one of "support", "refute".{format_reminder}""",
}

# Appended to round-1 rebuttal prompts only: the judge opens the exchange.
INITIATION_BLOCK = (
    "\nThe judge has opened the debate: both advocates have given opening"
    "\nstatements, and you now exchange rebuttals until the judge reaches a"
    "\nverdict."
)

_FORMATTER = string.Formatter()


def required_variables(template_id: TemplateId) -> frozenset[str]:
    """Placeholder names that must be bound to render the template."""
    names: set[str] = set()
    for _, field_name, _, _ in _FORMATTER.parse(TEMPLATES[template_id]):
        if field_name:
            names.add(field_name)
    return frozenset(names)


@dataclass(frozen=True)
class PromptInstance:
    """A fully rendered prompt plus the inputs it was rendered from."""

    template_id: TemplateId
    variables: dict[str, str]
    rendered: str = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", dict(self.variables))


def render(template_id: TemplateId, variables: dict[str, str]) -> PromptInstance:
    """Render a template; every placeholder must be bound, values must be str."""
    for name, value in variables.items():
        if not isinstance(value, str):
            raise ValueError(f"template variable {name!r} must be str, got {type(value).__name__}")
    missing = required_variables(template_id) - set(variables)
    if missing:
        raise ValueError(
            f"template {template_id.value} missing variables: {sorted(missing)}"
        )
    rendered = TEMPLATES[template_id].format_map(variables)
    return PromptInstance(template_id=template_id, variables=variables, rendered=rendered)
