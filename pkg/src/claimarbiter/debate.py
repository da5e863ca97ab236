"""Structured debate: two advocates argue, a judge decides round by round.

Both advocates open from their own evidence brief only; after that each
round consists of a support rebuttal, a refute rebuttal, and a judge
decision, all computed from inputs frozen at the start of the round. An
advocate sees the opposing evidence only through the opponent's statements,
never the opposing brief. Histories grow by exactly two statements per
round per participant: an advocate's own history gains the opponent's
previous statement and its own new one, the judge's history gains both new
statements after it has ruled on them.

At the round cap the judge is re-prompted with a forced-verdict template
that removes "continue" from the option set. A judge that still refuses
twice triggers the default rule: the side with the larger total evidence
weight wins, a tie falls back to the sign of the stage-1 score, and a zero
or unavailable score resolves to refute, the conservative end.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Union

from claimarbiter.core import Claim, JudgeSignal, PipelineConfig, Stance
from claimarbiter.errors import DebateAborted, MalformedResponse
from claimarbiter.evidence import EvidenceBrief, EvidencePartition
from claimarbiter.prompts import INITIATION_BLOCK, TemplateId

logger = logging.getLogger(__name__)


class AgentRole(Enum):
    SUPPORT_ADVOCATE = "support_advocate"
    REFUTE_ADVOCATE = "refute_advocate"
    JUDGE = "judge"


ROLE_STANCE = {
    AgentRole.SUPPORT_ADVOCATE: Stance.SUPPORT,
    AgentRole.REFUTE_ADVOCATE: Stance.REFUTE,
}


@dataclass(frozen=True)
class Statement:
    """One advocate utterance; round 0 is the opening statement."""

    round: int
    author: AgentRole
    text: str
    raw_response_ref: str = ""

    def __post_init__(self):
        if self.round < 0:
            raise ValueError("round must be >= 0")
        if self.author not in ROLE_STANCE:
            raise ValueError("statements come from advocates, not the judge")
        if not self.text or not self.text.strip():
            raise ValueError("statement text must be non-empty")


@dataclass(frozen=True)
class JudgeDecision:
    """The judge's ruling after one round."""

    round: int
    outcome: JudgeSignal
    forced: bool
    rationale: str = ""
    raw_response_ref: str = ""

    def __post_init__(self):
        if self.round < 1:
            raise ValueError("judge decisions start at round 1")
        if self.forced and self.outcome is JudgeSignal.CONTINUE:
            raise ValueError("a forced decision cannot be 'continue'")


TranscriptEvent = Union[Statement, JudgeDecision]


class TranscriptHistory:
    """Append-only conversation history owned by one debate participant."""

    def __init__(self, owner: AgentRole):
        self.owner = owner
        self._entries: list[Statement] = []

    def append(self, statement: Statement) -> None:
        self._entries.append(statement)

    @property
    def entries(self) -> tuple[Statement, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def render(self) -> str:
        """Prompt-ready text form; deterministic for identical entries."""
        if not self._entries:
            return "(empty)"
        blocks = [
            f"[{statement.author.value} | round {statement.round}]\n{statement.text}"
            for statement in self._entries
        ]
        return "\n\n".join(blocks)


@dataclass(frozen=True)
class DebateOutcome:
    """Final verdict plus the full, replayable transcript."""

    verdict: Stance
    rounds_used: int
    forced: bool
    transcript: tuple[TranscriptEvent, ...]
    histories: dict[AgentRole, tuple[Statement, ...]] = field(compare=False, default_factory=dict)


class _JudgeDeadlock(Exception):
    """Internal: the judge returned continue twice under the forced template."""


def opening_statement(claim: Claim, role: AgentRole, brief: EvidenceBrief,
                      gateway) -> Statement:
    """Round-0 statement from one advocate, argued from its brief alone."""
    stance = ROLE_STANCE[role]
    if brief.stance is not stance:
        raise ValueError(f"{role.value} cannot open from a {brief.stance.value} brief")
    try:
        reply = gateway.structured(
            TemplateId.OPENING_STATEMENT,
            {"claim": claim.text, "stance": stance.value, "brief": brief.concatenated},
        )
    except MalformedResponse as exc:
        raise DebateAborted(f"{role.value} opening stayed malformed: {exc}") from exc
    return Statement(round=0, author=role, text=reply.fields["statement"],
                     raw_response_ref=reply.digest)


def rebuttal(claim: Claim, role: AgentRole, opponent_statement: Statement,
             own_history: TranscriptHistory, gateway) -> Statement:
    """One advocate's response to the opponent's latest statement."""
    stance = ROLE_STANCE[role]
    if own_history.owner is not role:
        raise ValueError("rebuttal must use the advocate's own history")
    if not len(own_history):
        raise ValueError("advocate history must contain the opening statement")
    if opponent_statement.author is role:
        raise ValueError("opponent statement authored by the advocate itself")
    if opponent_statement.round != own_history.entries[-1].round:
        raise ValueError(
            f"opponent statement is from round {opponent_statement.round}, advocate"
            f" last spoke in round {own_history.entries[-1].round}"
        )
    round_number = opponent_statement.round + 1
    try:
        reply = gateway.structured(
            TemplateId.REBUTTAL,
            {
                "claim": claim.text,
                "stance": stance.value,
                "opponent_statement": opponent_statement.text,
                "history": own_history.render(),
                "initiation": INITIATION_BLOCK if round_number == 1 else "",
            },
        )
    except MalformedResponse as exc:
        raise DebateAborted(f"{role.value} rebuttal stayed malformed: {exc}") from exc
    return Statement(round=round_number, author=role, text=reply.fields["statement"],
                     raw_response_ref=reply.digest)


def judge_round(claim: Claim, support_statement: Statement, refute_statement: Statement,
                judge_history: TranscriptHistory, round_number: int, max_rounds: int,
                gateway) -> JudgeDecision:
    """Ask the judge to rule on the round just played.

    Below the cap the judge may continue; at the cap the forced template is
    used and a "continue" answer gets exactly one re-ask before the caller
    falls back to the default rule.
    """
    if support_statement.round != round_number or refute_statement.round != round_number:
        raise ValueError("judge must rule on the statements of the current round")
    if support_statement.author is not AgentRole.SUPPORT_ADVOCATE:
        raise ValueError("support statement has the wrong author")
    if refute_statement.author is not AgentRole.REFUTE_ADVOCATE:
        raise ValueError("refute statement has the wrong author")
    if not 1 <= round_number <= max_rounds:
        raise ValueError(f"round {round_number} outside 1..{max_rounds}")

    forced = round_number == max_rounds
    variables = {
        "claim": claim.text,
        "support_statement": support_statement.text,
        "refute_statement": refute_statement.text,
        "history": judge_history.render(),
    }
    if forced:
        template = TemplateId.JUDGE_FORCED_VERDICT
    else:
        template = TemplateId.JUDGE_ROUND
        variables["round"] = str(round_number)
        variables["max_rounds"] = str(max_rounds)

    try:
        reply = gateway.structured(template, variables)
        if forced and reply.fields["decision"] is JudgeSignal.CONTINUE:
            logger.warning("judge refused the forced verdict once, re-asking")
            # the extra variable changes the fingerprint, not the prompt text
            reply = gateway.structured(template, dict(variables, attempt="2"))
            if reply.fields["decision"] is JudgeSignal.CONTINUE:
                raise _JudgeDeadlock()
    except MalformedResponse as exc:
        raise DebateAborted(f"judge ruling stayed malformed: {exc}") from exc
    return JudgeDecision(
        round=round_number,
        outcome=reply.fields["decision"],
        forced=forced,
        rationale=reply.fields["rationale"],
        raw_response_ref=reply.digest,
    )


def default_verdict(partition: EvidencePartition,
                    sigma: Fraction | None) -> tuple[Stance, str]:
    """Deterministic tie-breaker when the judge refuses to rule at the cap."""
    support_weight = partition.side_weight(Stance.SUPPORT)
    refute_weight = partition.side_weight(Stance.REFUTE)
    if support_weight != refute_weight:
        winner = Stance.SUPPORT if support_weight > refute_weight else Stance.REFUTE
        return winner, (
            f"default verdict: evidence weight {support_weight} supporting vs"
            f" {refute_weight} refuting"
        )
    if sigma is not None and sigma != 0:
        winner = Stance.SUPPORT if sigma > 0 else Stance.REFUTE
        return winner, f"default verdict: weights tied, agreement score {sigma} breaks the tie"
    return Stance.REFUTE, "default verdict: weights tied and no score signal, refuting"


def run_debate(claim: Claim, partition: EvidencePartition,
               briefs: tuple[EvidenceBrief, EvidenceBrief], cfg: PipelineConfig,
               gateway, sigma: Fraction | None = None) -> DebateOutcome:
    """Play the full debate and return the verdict with its transcript.

    Raises DebateAborted (with the partial transcript attached) if any agent
    response stays malformed after the gateway retry.
    """
    support_brief, refute_brief = briefs
    if support_brief.stance is not Stance.SUPPORT or refute_brief.stance is not Stance.REFUTE:
        raise ValueError("briefs must be passed as (support, refute)")
    transcript: list[TranscriptEvent] = []

    def abort(exc: DebateAborted) -> DebateAborted:
        return DebateAborted(str(exc), transcript=tuple(transcript))

    support_history = TranscriptHistory(AgentRole.SUPPORT_ADVOCATE)
    refute_history = TranscriptHistory(AgentRole.REFUTE_ADVOCATE)
    judge_history = TranscriptHistory(AgentRole.JUDGE)

    try:
        support_open = opening_statement(claim, AgentRole.SUPPORT_ADVOCATE, support_brief, gateway)
        transcript.append(support_open)
        refute_open = opening_statement(claim, AgentRole.REFUTE_ADVOCATE, refute_brief, gateway)
        transcript.append(refute_open)
    except DebateAborted as exc:
        raise abort(exc) from exc

    support_history.append(support_open)
    refute_history.append(refute_open)
    judge_history.append(support_open)
    judge_history.append(refute_open)

    previous_support, previous_refute = support_open, refute_open
    for round_number in range(1, cfg.max_rounds + 1):
        # freeze this round's inputs before any history mutates
        try:
            support_statement = rebuttal(
                claim, AgentRole.SUPPORT_ADVOCATE, previous_refute, support_history, gateway
            )
            refute_statement = rebuttal(
                claim, AgentRole.REFUTE_ADVOCATE, previous_support, refute_history, gateway
            )
        except DebateAborted as exc:
            raise abort(exc) from exc
        support_history.append(previous_refute)
        support_history.append(support_statement)
        refute_history.append(previous_support)
        refute_history.append(refute_statement)
        transcript.append(support_statement)
        transcript.append(refute_statement)

        try:
            decision = judge_round(
                claim, support_statement, refute_statement, judge_history,
                round_number, cfg.max_rounds, gateway,
            )
        except _JudgeDeadlock:
            verdict, rationale = default_verdict(partition, sigma)
            decision = JudgeDecision(
                round=round_number,
                outcome=JudgeSignal(verdict.value),
                forced=True,
                rationale=rationale,
            )
        except DebateAborted as exc:
            raise abort(exc) from exc
        judge_history.append(support_statement)
        judge_history.append(refute_statement)
        transcript.append(decision)

        if decision.outcome is not JudgeSignal.CONTINUE:
            return DebateOutcome(
                verdict=Stance(decision.outcome.value),
                rounds_used=round_number,
                forced=decision.forced,
                transcript=tuple(transcript),
                histories={
                    AgentRole.SUPPORT_ADVOCATE: support_history.entries,
                    AgentRole.REFUTE_ADVOCATE: refute_history.entries,
                    AgentRole.JUDGE: judge_history.entries,
                },
            )
        previous_support, previous_refute = support_statement, refute_statement

    raise AssertionError("unreachable: the round cap always produces a verdict")
