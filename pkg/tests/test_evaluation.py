import json
import random
from fractions import Fraction

import pytest

from claimarbiter.core import PipelineConfig, Stance
from claimarbiter.errors import EmptyDataset, SchemaError, UnknownClaimId
from claimarbiter.evaluation import (
    LabeledDataset,
    coverage_stats,
    evaluate_records,
    load_dataset,
    macro_metrics,
)
from claimarbiter.pipeline import DecisionStage, VerdictRecord

S, R = Stance.SUPPORT, Stance.REFUTE


def write_rows(path, rows):
    path.write_text("\n".join(json.dumps(row) for row in rows) + "\n", encoding="utf-8")
    return path


def sample_rows():
    return [
        {"id": "a", "claim": "Claim A holds.", "label": "support"},
        {"id": "b", "claim": "Claim B holds.", "label": "refute"},
        {"id": "c", "claim": "Claim C holds.", "label": "support"},
    ]


def dataset_from(labels: dict[str, Stance]) -> LabeledDataset:
    from claimarbiter.core import Claim

    return LabeledDataset(
        name="inline",
        claims=tuple(
            Claim(id=cid, text=f"Claim {cid}.", gold_label=stance)
            for cid, stance in labels.items()
        ),
    )


def oracle_metrics(pairs, labels):
    """Brute-force per-class counts, independent of the implementation."""
    out = {}
    for stance in (S, R):
        tp = sum(1 for cid, p in pairs if p is stance and labels[cid] is stance)
        fp = sum(1 for cid, p in pairs if p is stance and labels[cid] is not stance)
        fn = sum(1 for cid, p in pairs if p is not stance and labels[cid] is stance)
        precision = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
        recall = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
        back = (2 * precision * recall / (precision + recall)
                if precision + recall else Fraction(0))
        out[stance] = {"tp": tp, "fp": fp, "fn": fn,
                       "precision": precision, "recall": recall, "f1": back}
    out["macro_f1"] = (out[S]["f1"] + out[R]["f1"]) / 2
    out["macro_precision"] = (out[S]["precision"] + out[R]["precision"]) / 2
    out["macro_recall"] = (out[S]["recall"] + out[R]["recall"]) / 2
    return out


def make_record(cid, *, verdict=None, stage=None, reason=None, text="claim text"):
    return VerdictRecord(
        claim_id=cid,
        claim_text=text,
        verdict=verdict,
        decided_by=stage,
        unverifiable_reason=reason,
        sigma=None,
        normalizer_z=None,
        rounds_used=None,
        forced=None,
        config=PipelineConfig().as_dict(),
        audit=(),
    )


class TestLoadDataset:
    def test_happy_path(self, tmp_path):
        path = write_rows(tmp_path / "claims.jsonl", sample_rows())
        dataset = load_dataset(path)
        assert dataset.name == "claims"
        assert len(dataset) == 3
        assert dataset.support_count == 2
        assert dataset.refute_count == 1
        assert dataset.labels_by_id() == {"a": S, "b": R, "c": S}
        assert dataset.claims[0].text == "Claim A holds."

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "claims.jsonl"
        rows = [json.dumps(row) for row in sample_rows()]
        path.write_text(rows[0] + "\n\n" + rows[1] + "\n   \n" + rows[2] + "\n")
        assert len(load_dataset(path)) == 3

    @pytest.mark.parametrize("alias,stance", [
        ("support", S), ("Supported", S), ("SUPPORT", S),
        ("refute", R), ("refuted", R), (" Refuted ", R),
    ])
    def test_label_aliases(self, tmp_path, alias, stance):
        path = write_rows(tmp_path / "d.jsonl",
                          [{"id": "a", "claim": "text", "label": alias}])
        assert load_dataset(path).claims[0].gold_label is stance

    @pytest.mark.parametrize("label", ["mixture", "unknown", "neither", 1, None])
    def test_labels_outside_the_closed_set_rejected(self, tmp_path, label):
        path = write_rows(tmp_path / "d.jsonl",
                          [{"id": "a", "claim": "text", "label": label}])
        with pytest.raises(SchemaError, match="closed set"):
            load_dataset(path)

    def test_empty_dataset_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("\n\n")
        with pytest.raises(EmptyDataset):
            load_dataset(path)

    def test_duplicate_id_rejected(self, tmp_path):
        rows = sample_rows()
        rows[2]["id"] = "a"
        path = write_rows(tmp_path / "d.jsonl", rows)
        with pytest.raises(SchemaError, match="duplicate claim id 'a'"):
            load_dataset(path)

    def test_missing_field_names_the_line(self, tmp_path):
        path = write_rows(tmp_path / "d.jsonl",
                          [{"id": "a", "claim": "text", "label": "support"},
                           {"id": "b", "label": "support"}])
        with pytest.raises(SchemaError, match=r"line 2.*claim"):
            load_dataset(path)

    def test_invalid_json_names_the_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"id": "a", "claim": "t", "label": "support"}\n{oops\n')
        with pytest.raises(SchemaError, match="line 2"):
            load_dataset(path)

    def test_non_object_row_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('["not", "an", "object"]\n')
        with pytest.raises(SchemaError, match="object"):
            load_dataset(path)

    @pytest.mark.parametrize("field,value", [("id", ""), ("id", 7), ("claim", " ")])
    def test_id_and_claim_must_be_non_empty_strings(self, tmp_path, field, value):
        row = {"id": "a", "claim": "text", "label": "support"}
        row[field] = value
        path = write_rows(tmp_path / "d.jsonl", [row])
        with pytest.raises(SchemaError):
            load_dataset(path)

    def test_only_jsonl_format_supported(self, tmp_path):
        with pytest.raises(ValueError, match="unsupported dataset format 'csv'"):
            load_dataset(tmp_path / "d.csv", format="csv")


class TestManifest:
    def test_sibling_manifest_autodetected_and_matching_is_silent(self, tmp_path, caplog):
        path = write_rows(tmp_path / "d.jsonl", sample_rows())
        (tmp_path / "d.jsonl.manifest.json").write_text(
            json.dumps({"counts": {"support": 2, "refute": 1}})
        )
        with caplog.at_level("WARNING"):
            load_dataset(path)
        assert not caplog.records

    def test_count_mismatch_warns_but_loads(self, tmp_path, caplog):
        path = write_rows(tmp_path / "d.jsonl", sample_rows())
        (tmp_path / "d.jsonl.manifest.json").write_text(
            json.dumps({"counts": {"support": 99, "refute": 1}})
        )
        with caplog.at_level("WARNING"):
            dataset = load_dataset(path)
        assert len(dataset) == 3
        assert any("manifest pins 99" in record.getMessage()
                   for record in caplog.records)

    def test_explicit_manifest_path(self, tmp_path, caplog):
        path = write_rows(tmp_path / "d.jsonl", sample_rows())
        manifest = tmp_path / "elsewhere.json"
        manifest.write_text(json.dumps({"counts": {"refute": 5}}))
        with caplog.at_level("WARNING"):
            load_dataset(path, manifest_path=manifest)
        assert any("manifest pins 5" in record.getMessage()
                   for record in caplog.records)

    def test_unreadable_manifest_is_fatal(self, tmp_path):
        path = write_rows(tmp_path / "d.jsonl", sample_rows())
        (tmp_path / "d.jsonl.manifest.json").write_text("{broken")
        with pytest.raises(SchemaError, match="unreadable manifest"):
            load_dataset(path)

    def test_manifest_without_counts_is_fine(self, tmp_path):
        path = write_rows(tmp_path / "d.jsonl", sample_rows())
        (tmp_path / "d.jsonl.manifest.json").write_text(json.dumps({"note": "hi"}))
        assert len(load_dataset(path)) == 3


class TestMacroMetrics:
    def test_worked_example(self):
        gold = dataset_from({"1": S, "2": S, "3": S, "4": R})
        report = macro_metrics([("1", S), ("2", S), ("3", R), ("4", R)], gold)
        support = report.per_class[S]
        assert (support.precision, support.recall, support.f1) == (
            Fraction(1), Fraction(2, 3), Fraction(4, 5)
        )
        refute = report.per_class[R]
        assert (refute.precision, refute.recall, refute.f1) == (
            Fraction(1, 2), Fraction(1), Fraction(2, 3)
        )
        assert report.macro_f1 == Fraction(11, 15)
        assert report.macro_precision == Fraction(3, 4)
        assert report.macro_recall == Fraction(5, 6)
        assert report.confusion == {
            "support": {"support": 2, "refute": 1, "unverifiable": 0},
            "refute": {"support": 0, "refute": 1, "unverifiable": 0},
        }

    def test_macro_f1_is_mean_of_f1s_not_f1_of_means(self):
        gold = dataset_from({"1": S, "2": S, "3": S, "4": R})
        report = macro_metrics([("1", S), ("2", S), ("3", R), ("4", R)], gold)
        mean_p, mean_r = report.macro_precision, report.macro_recall
        f1_of_means = 2 * mean_p * mean_r / (mean_p + mean_r)
        assert report.macro_f1 != f1_of_means

    def test_unverifiable_is_a_false_negative_only(self):
        gold = dataset_from({"1": S, "2": S, "3": R})
        report = macro_metrics([("1", S), ("2", None), ("3", R)], gold)
        support = report.per_class[S]
        assert (support.true_positive, support.false_positive,
                support.false_negative) == (1, 0, 1)
        refute = report.per_class[R]
        # the abstention never lands in any precision denominator
        assert (refute.true_positive, refute.false_positive,
                refute.false_negative) == (1, 0, 0)
        assert refute.precision == Fraction(1)
        assert report.unverifiable_count == 1
        assert report.confusion["support"]["unverifiable"] == 1

    def test_zero_denominators_are_zero(self):
        gold = dataset_from({"1": S, "2": R})
        report = macro_metrics([("1", None), ("2", None)], gold)
        for stance in (S, R):
            metrics = report.per_class[stance]
            assert metrics.precision == 0
            assert metrics.recall == 0
            assert metrics.f1 == 0
        assert report.macro_f1 == 0
        assert report.unverifiable_count == 2

    def test_absent_class_scores_zero_and_halves_the_macro(self):
        gold = dataset_from({"1": S, "2": S})
        report = macro_metrics([("1", S), ("2", S)], gold)
        assert report.per_class[S].f1 == Fraction(1)
        assert report.per_class[R].f1 == Fraction(0)
        assert report.macro_f1 == Fraction(1, 2)

    def test_values_are_exact_rationals(self):
        gold = dataset_from({"1": S, "2": S, "3": S, "4": R})
        report = macro_metrics([("1", S), ("2", S), ("3", R), ("4", R)], gold)
        assert isinstance(report.macro_f1, Fraction)
        assert report.macro_f1 == Fraction(11, 15)  # not merely approximately

    def test_subset_of_gold_claims_is_allowed(self):
        gold = dataset_from({"1": S, "2": R, "3": S})
        report = macro_metrics([("1", S)], gold)
        assert report.total == 1

    def test_unknown_claim_id_rejected(self):
        gold = dataset_from({"1": S})
        with pytest.raises(UnknownClaimId, match="ghost"):
            macro_metrics([("ghost", S)], gold)

    def test_duplicate_prediction_rejected(self):
        gold = dataset_from({"1": S})
        with pytest.raises(SchemaError, match="duplicate prediction"):
            macro_metrics([("1", S), ("1", S)], gold)

    def test_prediction_order_is_irrelevant(self):
        labels = {f"c{i}": (S if i % 3 else R) for i in range(12)}
        gold = dataset_from(labels)
        pairs = [(cid, [S, R, None][i % 3]) for i, cid in enumerate(labels)]
        forward = macro_metrics(pairs, gold)
        backward = macro_metrics(list(reversed(pairs)), gold)
        assert forward == backward

    def test_matches_brute_force_oracle_on_random_cases(self):
        rng = random.Random(20240817)
        for _ in range(200):
            size = rng.randint(1, 40)
            labels = {f"c{i}": rng.choice((S, R)) for i in range(size)}
            gold = dataset_from(labels)
            pairs = [(cid, rng.choice((S, R, None))) for cid in labels]
            report = macro_metrics(pairs, gold)
            expected = oracle_metrics(pairs, labels)
            for stance in (S, R):
                metrics = report.per_class[stance]
                want = expected[stance]
                assert metrics.true_positive == want["tp"]
                assert metrics.false_positive == want["fp"]
                assert metrics.false_negative == want["fn"]
                assert metrics.precision == want["precision"]
                assert metrics.recall == want["recall"]
                assert metrics.f1 == want["f1"]
            assert report.macro_f1 == expected["macro_f1"]
            assert report.macro_precision == expected["macro_precision"]
            assert report.macro_recall == expected["macro_recall"]

    def test_to_dict_serializes_floats_and_exact_string(self):
        gold = dataset_from({"1": S, "2": S, "3": S, "4": R})
        report = macro_metrics([("1", S), ("2", S), ("3", R), ("4", R)], gold)
        data = report.to_dict()
        assert data["macro_f1"] == pytest.approx(11 / 15)
        assert data["macro_f1_exact"] == "11/15"
        assert data["per_class"]["support"]["recall"] == pytest.approx(2 / 3)
        assert data["coverage"] is None


class TestCoverageStats:
    @staticmethod
    def records_and_gold():
        gold = dataset_from({"s1": S, "s2": R, "s3": S, "s4": S})
        records = [
            make_record("s1", verdict=S, stage=DecisionStage.STAGE1),
            make_record("s2", verdict=R, stage=DecisionStage.STAGE1),
            make_record("s3", verdict=S, stage=DecisionStage.STAGE2),
            make_record("s4", reason="no articles"),
        ]
        return records, gold

    def test_coverage_counts_stage1_share(self):
        records, gold = self.records_and_gold()
        coverage, stage1_f1 = coverage_stats(records, gold)
        assert coverage == Fraction(1, 2)
        assert stage1_f1 == Fraction(1)

    def test_no_stage1_records_leaves_f1_undefined(self):
        gold = dataset_from({"s1": S})
        records = [make_record("s1", verdict=S, stage=DecisionStage.STAGE2)]
        coverage, stage1_f1 = coverage_stats(records, gold)
        assert coverage == Fraction(0)
        assert stage1_f1 is None

    def test_zero_records_rejected(self):
        gold = dataset_from({"s1": S})
        with pytest.raises(ValueError, match="zero records"):
            coverage_stats([], gold)

    def test_evaluate_records_combines_everything(self):
        records, gold = self.records_and_gold()
        report = evaluate_records(records, gold)
        assert report.coverage == Fraction(1, 2)
        assert report.stage1_f1 == Fraction(1)
        assert report.total == 4
        assert report.unverifiable_count == 1
        support = report.per_class[S]
        assert (support.precision, support.recall) == (Fraction(1), Fraction(2, 3))
        assert report.per_class[R].f1 == Fraction(1)
        assert report.macro_f1 == Fraction(9, 10)
