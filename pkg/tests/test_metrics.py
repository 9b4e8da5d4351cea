import numpy as np
import pytest

from jumper.exceptions import EmptyInput, UndefinedMetric
from jumper.metrics import (
    EvalRecord,
    classification_accuracy,
    jumping_accuracy,
    macro_f1,
    majority_guess,
    metrics_report,
    overall_accuracy,
    reduced_reading,
)


def record(predicted, gold, pred_jump=1, gold_jump=None, num_sentences=3, slot="label", id=0):
    return EvalRecord(id, slot, predicted, gold, pred_jump, gold_jump, num_sentences)


@pytest.mark.parametrize(
    "num_correct,total,expected",
    [(3, 3, 1.0), (0, 3, 0.0), (389, 400, 0.9725)],
)
def test_classification_accuracy(num_correct, total, expected):
    records = [record(1, 1)] * num_correct + [record(2, 1)] * (total - num_correct)
    assert classification_accuracy(records) == pytest.approx(expected)


def test_classification_accuracy_empty():
    with pytest.raises(EmptyInput):
        classification_accuracy([])


@pytest.mark.parametrize(
    "records,expected",
    [
        ([record(1, 1, 2, 2), record(2, 2, 1, 1)], 1.0),
        ([record(1, 1, 2, 3), record(2, 2, 2, 1)], 0.0),
        ([record(1, 1, 2, 2), record(2, 2, 3, 2), record(1, 2, 1, 1)], 0.5),
    ],
)
def test_jumping_accuracy(records, expected):
    assert jumping_accuracy(records) == expected


def test_jumping_accuracy_undefined():
    with pytest.raises(UndefinedMetric):
        jumping_accuracy([record(1, 2, 1, 1)])
    with pytest.raises(UndefinedMetric):
        jumping_accuracy([record(1, 1)])


@pytest.mark.parametrize(
    "pred_jump,tolerance,expected",
    [(2, 0, 0.0), (2, 1, 1.0), (1, 1, 0.0), (1, 2, 1.0), (3, 0, 1.0), (3, 2, 1.0)],
)
def test_jumping_accuracy_tolerance(pred_jump, tolerance, expected):
    records = [record(1, 1, pred_jump, 3, num_sentences=4)]
    assert jumping_accuracy(records, tolerance) == expected


def test_jump_after_gold_never_tolerated():
    assert jumping_accuracy([record(1, 1, 4, 3, num_sentences=4)], tolerance=3) == 0.0


def test_overall_accuracy_brute_force():
    records = [
        record(1, 1, 1, 1),
        record(1, 1, 2, 1),
        record(2, 1, 1, 1),
        record(2, 1, 2, 2),
    ]
    both_correct = sum(r.correct and r.pred_jump == r.gold_jump for r in records) / len(records)
    assert overall_accuracy(records) == both_correct == 0.25
    assert overall_accuracy(records) == classification_accuracy(records) * jumping_accuracy(
        records
    )


def test_overall_accuracy_zero_jumping_accuracy():
    assert overall_accuracy([record(1, 1, 2, 1), record(2, 1, 1, 1)]) == 0.0


def random_records(rng, n, num_classes=3, slots=("a", "b")):
    records = []
    for i in range(n):
        num_sentences = int(rng.integers(1, 7))
        for slot in slots:
            records.append(
                EvalRecord(
                    example_id=i,
                    slot=slot,
                    predicted=int(rng.integers(num_classes)),
                    gold=int(rng.integers(num_classes)),
                    pred_jump=int(rng.integers(1, num_sentences + 1)),
                    gold_jump=int(rng.integers(1, num_sentences + 1)),
                    num_sentences=num_sentences,
                )
            )
    return records


def test_overall_accuracy_identity_on_random_records():
    rng = np.random.default_rng(2)
    for _ in range(50):
        records = random_records(rng, 40)
        expected = classification_accuracy(records) * jumping_accuracy(records)
        assert overall_accuracy(records) == expected


def test_reduced_reading_table_scale():
    records = (
        [record(1, 1, pred_jump=2, num_sentences=3)] * 17
        + [record(1, 1, pred_jump=2, num_sentences=2)] * 29
        + [record(1, 1, pred_jump=1, num_sentences=2)] * 54
    )
    avg_sentences, avg_jump, reduced = reduced_reading(records)
    assert avg_sentences == pytest.approx(2.17)
    assert avg_jump == pytest.approx(1.46)
    assert reduced == pytest.approx(0.327, abs=1e-3)


@pytest.mark.parametrize(
    "records,expected",
    [
        ([record(1, 1, pred_jump=3), record(1, 1, pred_jump=2, num_sentences=2)], 0.0),
        ([record(1, 1, pred_jump=1, num_sentences=2)] * 4, 0.5),
    ],
)
def test_reduced_reading(records, expected):
    assert reduced_reading(records)[2] == pytest.approx(expected)


def test_macro_f1():
    assert macro_f1([record(1, 1), record(2, 2), record(0, 0)]) == 1.0

    skewed = [record(1, 1)] * 9 + [record(1, 2)]
    assert macro_f1(skewed) == pytest.approx((18 / 19 + 0.0) / 2)
    assert macro_f1(skewed) == pytest.approx(0.4737, abs=1e-4)


def test_macro_f1_averages_over_slots():
    records = [record(1, 1, slot="a"), record(2, 2, slot="a")] + [
        record(1, 1, slot="b"),
        record(1, 2, slot="b"),
    ]
    assert macro_f1(records) == pytest.approx((1.0 + (2 / 3 + 0.0) / 2) / 2)


def test_majority_guess():
    records = [record(3, 3, slot="level")] * 1653 + [record(1, 1, slot="level")] * 347
    records += [record(0, 0, slot="other"), record(0, 1, slot="other")]
    assert majority_guess(records) == {"level": pytest.approx(0.8265), "other": 0.5}


def test_metrics_are_order_invariant_and_bounded():
    rng = np.random.default_rng(5)
    records = random_records(rng, 60)
    report = metrics_report(records)
    shuffled = [records[i] for i in rng.permutation(len(records))]
    assert metrics_report(shuffled) == report

    for key in ("CA", "JA", "OA", "macro_F1"):
        assert 0.0 <= report[key] <= 1.0
    assert 0.0 <= report["reduced"] < 1.0


def test_metrics_report_without_gold_jumps():
    records = [record(1, 1, 1), record(2, 1, 3), record(1, 1, 3, slot="other")]
    report = metrics_report(records)
    assert "JA" not in report and "OA" not in report
    assert report["CA"] == pytest.approx(2 / 3)
    assert report["jump_step_counts"] == {"1": 1, "3": 2}
    assert set(report["per_slot"]) == {"label", "other"}
    assert report["per_slot"]["other"] == {"CA": 1.0, "macro_F1": 1.0}


def test_metrics_report_with_matching_gold_jumps():
    records = [record(1, 1, 2, 2), record(2, 2, 1, 1), record(0, 1, 3, 3)]
    report = metrics_report(records)
    assert report["JA"] == 1.0
    assert report["OA"] == report["CA"]
    assert "JA_tolerance" not in report

    assert metrics_report(records, tolerance=1)["JA_tolerance"] == 1


def test_metrics_report_undefined_jumping_accuracy(caplog):
    report = metrics_report([record(1, 2, 1, 1)])
    assert report["JA"] is None and report["OA"] is None
    assert "correctly classified" in caplog.text


@pytest.mark.parametrize("pred_jump,gold_jump", [(0, None), (4, None), (1, 0), (1, 4)])
def test_eval_record_jump_range(pred_jump, gold_jump):
    with pytest.raises(ValueError):
        record(1, 1, pred_jump, gold_jump, num_sentences=3)
