"""Labeled dataset loading and macro-averaged evaluation metrics.

Datasets are line-delimited JSON with fields {id, claim, label} and a closed
label set (support/refute, with the past-tense spellings accepted as
aliases). An optional manifest can pin the expected class counts; a mismatch
is loudly warned about but does not fail the load, since the manifest guards
against truncated downloads rather than policy.

Metric conventions: per-class precision, recall, and F1 with the
zero-denominator cases defined as 0; macro values are the unweighted mean of
the two per-class values (not the F1 of mean precision and recall, which is
a different number). An Unverifiable prediction counts as a false negative
for the claim's gold class and never enters any precision denominator. All
arithmetic is exact; values convert to float only when serialized.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from claimarbiter.core import Claim, Stance
from claimarbiter.errors import EmptyDataset, SchemaError, UnknownClaimId
from claimarbiter.pipeline import DecisionStage, VerdictRecord

logger = logging.getLogger(__name__)

_LABEL_ALIASES = {
    "support": Stance.SUPPORT,
    "supported": Stance.SUPPORT,
    "refute": Stance.REFUTE,
    "refuted": Stance.REFUTE,
}

UNVERIFIABLE = "unverifiable"


@dataclass(frozen=True)
class LabeledDataset:
    """A named set of claims, each carrying a gold label."""

    name: str
    claims: tuple[Claim, ...]

    def __post_init__(self):
        object.__setattr__(self, "claims", tuple(self.claims))

    def __len__(self) -> int:
        return len(self.claims)

    def count(self, stance: Stance) -> int:
        return sum(1 for claim in self.claims if claim.gold_label is stance)

    @property
    def support_count(self) -> int:
        return self.count(Stance.SUPPORT)

    @property
    def refute_count(self) -> int:
        return self.count(Stance.REFUTE)

    def labels_by_id(self) -> dict[str, Stance]:
        return {claim.id: claim.gold_label for claim in self.claims}


def _normalize_label(raw, line_no: int) -> Stance:
    if isinstance(raw, str):
        stance = _LABEL_ALIASES.get(raw.strip().lower())
        if stance is not None:
            return stance
    raise SchemaError(
        f"line {line_no}: label {raw!r} is outside the closed set support/refute"
    )


def load_dataset(path: str | Path, format: str = "jsonl",
                 manifest_path: str | Path | None = None) -> LabeledDataset:
    """Load and validate a labeled dataset file.

    If manifest_path is omitted, a sibling file named '<dataset>.manifest.json'
    is used when present. The manifest may pin {"counts": {"support": n,
    "refute": n}}; mismatches log a warning.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported dataset format {format!r}")
    path = Path(path)
    claims: list[Claim] = []
    seen_ids: set[str] = set()
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {line_no}: not valid JSON: {exc}") from exc
            if not isinstance(row, dict):
                raise SchemaError(f"line {line_no}: row must be a JSON object")
            missing = {"id", "claim", "label"} - set(row)
            if missing:
                raise SchemaError(f"line {line_no}: missing fields {sorted(missing)}")
            claim_id = row["id"]
            if not isinstance(claim_id, str) or not claim_id.strip():
                raise SchemaError(f"line {line_no}: id must be a non-empty string")
            if claim_id in seen_ids:
                raise SchemaError(f"line {line_no}: duplicate claim id {claim_id!r}")
            seen_ids.add(claim_id)
            text = row["claim"]
            if not isinstance(text, str) or not text.strip():
                raise SchemaError(f"line {line_no}: claim must be a non-empty string")
            claims.append(
                Claim(id=claim_id, text=text, gold_label=_normalize_label(row["label"], line_no))
            )
    if not claims:
        raise EmptyDataset(f"dataset {path} contains no claims")

    dataset = LabeledDataset(name=path.stem, claims=tuple(claims))

    if manifest_path is None:
        sibling = Path(str(path) + ".manifest.json")
        manifest_path = sibling if sibling.exists() else None
    if manifest_path is not None:
        _check_manifest(dataset, Path(manifest_path))
    return dataset


def _check_manifest(dataset: LabeledDataset, manifest_path: Path) -> None:
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"unreadable manifest {manifest_path}: {exc}") from exc
    counts = manifest.get("counts", {})
    expected = {
        Stance.SUPPORT: counts.get("support"),
        Stance.REFUTE: counts.get("refute"),
    }
    for stance, pinned in expected.items():
        if pinned is None:
            continue
        actual = dataset.count(stance)
        if actual != pinned:
            logger.warning(
                "dataset %s: manifest pins %d %s claims, file has %d",
                dataset.name, pinned, stance.value, actual,
            )


@dataclass(frozen=True)
class ClassMetrics:
    precision: Fraction
    recall: Fraction
    f1: Fraction
    true_positive: int
    false_positive: int
    false_negative: int


@dataclass(frozen=True)
class MetricReport:
    """Macro metrics over a prediction set, with exact rational values."""

    per_class: dict[Stance, ClassMetrics]
    macro_precision: Fraction
    macro_recall: Fraction
    macro_f1: Fraction
    confusion: dict[str, dict[str, int]]  # gold -> predicted (incl. unverifiable)
    total: int
    unverifiable_count: int
    coverage: Fraction | None = None
    stage1_f1: Fraction | None = None

    def to_dict(self) -> dict:
        def as_float(value: Fraction | None):
            return float(value) if value is not None else None

        return {
            "total": self.total,
            "unverifiable_count": self.unverifiable_count,
            "macro_precision": as_float(self.macro_precision),
            "macro_recall": as_float(self.macro_recall),
            "macro_f1": as_float(self.macro_f1),
            "macro_f1_exact": str(self.macro_f1),
            "coverage": as_float(self.coverage),
            "stage1_f1": as_float(self.stage1_f1),
            "per_class": {
                stance.value: {
                    "precision": float(metrics.precision),
                    "recall": float(metrics.recall),
                    "f1": float(metrics.f1),
                    "true_positive": metrics.true_positive,
                    "false_positive": metrics.false_positive,
                    "false_negative": metrics.false_negative,
                }
                for stance, metrics in self.per_class.items()
            },
            "confusion": self.confusion,
        }


def _safe_ratio(numerator: int, denominator: int) -> Fraction:
    if denominator == 0:
        return Fraction(0)
    return Fraction(numerator, denominator)


def _f1(precision: Fraction, recall: Fraction) -> Fraction:
    if precision + recall == 0:
        return Fraction(0)
    return 2 * precision * recall / (precision + recall)


def macro_metrics(predictions: Iterable[tuple[str, Stance | None]],
                  gold: LabeledDataset) -> MetricReport:
    """Score predictions against gold labels; None predicts Unverifiable."""
    labels = gold.labels_by_id()
    seen: set[str] = set()
    tp = {Stance.SUPPORT: 0, Stance.REFUTE: 0}
    fp = {Stance.SUPPORT: 0, Stance.REFUTE: 0}
    fn = {Stance.SUPPORT: 0, Stance.REFUTE: 0}
    confusion = {
        gold_stance.value: {Stance.SUPPORT.value: 0, Stance.REFUTE.value: 0, UNVERIFIABLE: 0}
        for gold_stance in (Stance.SUPPORT, Stance.REFUTE)
    }
    total = 0
    unverifiable = 0
    for claim_id, predicted in predictions:
        if claim_id not in labels:
            raise UnknownClaimId(f"prediction references unknown claim id {claim_id!r}")
        if claim_id in seen:
            raise SchemaError(f"duplicate prediction for claim id {claim_id!r}")
        seen.add(claim_id)
        gold_stance = labels[claim_id]
        total += 1
        if predicted is None:
            unverifiable += 1
            fn[gold_stance] += 1
            confusion[gold_stance.value][UNVERIFIABLE] += 1
        elif predicted is gold_stance:
            tp[gold_stance] += 1
            confusion[gold_stance.value][predicted.value] += 1
        else:
            fp[predicted] += 1
            fn[gold_stance] += 1
            confusion[gold_stance.value][predicted.value] += 1

    per_class: dict[Stance, ClassMetrics] = {}
    for stance in (Stance.SUPPORT, Stance.REFUTE):
        precision = _safe_ratio(tp[stance], tp[stance] + fp[stance])
        recall = _safe_ratio(tp[stance], tp[stance] + fn[stance])
        per_class[stance] = ClassMetrics(
            precision=precision,
            recall=recall,
            f1=_f1(precision, recall),
            true_positive=tp[stance],
            false_positive=fp[stance],
            false_negative=fn[stance],
        )
    classes = (per_class[Stance.SUPPORT], per_class[Stance.REFUTE])
    return MetricReport(
        per_class=per_class,
        macro_precision=sum(c.precision for c in classes) / 2,
        macro_recall=sum(c.recall for c in classes) / 2,
        macro_f1=sum(c.f1 for c in classes) / 2,
        confusion=confusion,
        total=total,
        unverifiable_count=unverifiable,
    )


def coverage_stats(records: Sequence[VerdictRecord],
                   gold: LabeledDataset) -> tuple[Fraction, Fraction | None]:
    """Stage-1 coverage and macro F1 over the stage-1 subset (None if empty)."""
    if not records:
        raise ValueError("coverage undefined over zero records")
    stage1 = [record for record in records if record.decided_by is DecisionStage.STAGE1]
    coverage = Fraction(len(stage1), len(records))
    if not stage1:
        return coverage, None
    report = macro_metrics(
        [(record.claim_id, record.verdict) for record in stage1], gold
    )
    return coverage, report.macro_f1


def evaluate_records(records: Sequence[VerdictRecord],
                     gold: LabeledDataset) -> MetricReport:
    """Full evaluation of a batch of verdict records against gold labels."""
    base = macro_metrics(
        [(record.claim_id, record.verdict) for record in records], gold
    )
    coverage, stage1_f1 = coverage_stats(records, gold)
    return replace(base, coverage=coverage, stage1_f1=stage1_f1)
