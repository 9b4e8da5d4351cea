from __future__ import annotations

import logging
from collections import Counter, defaultdict
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from jumper.exceptions import EmptyInput, UndefinedMetric

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalRecord:
    """Outcome for one (example, slot); jump steps are 1-based"""

    example_id: int
    slot: str
    predicted: int
    gold: int
    pred_jump: int
    gold_jump: int | None
    num_sentences: int

    def __post_init__(self):
        if not 1 <= self.pred_jump <= self.num_sentences:
            raise ValueError(
                f"Example {self.example_id}: predicted jump {self.pred_jump} outside "
                f"[1, {self.num_sentences}]"
            )
        if self.gold_jump is not None and not 1 <= self.gold_jump <= self.num_sentences:
            raise ValueError(
                f"Example {self.example_id}: gold jump {self.gold_jump} outside "
                f"[1, {self.num_sentences}]"
            )

    @property
    def correct(self) -> bool:
        return self.predicted == self.gold

    def jump_correct(self, tolerance: int = 0) -> bool:
        if self.gold_jump is None:
            return False
        return self.gold_jump - tolerance <= self.pred_jump <= self.gold_jump


def _require(records: Sequence[EvalRecord]):
    if not records:
        raise EmptyInput("No evaluation records.")


def classification_accuracy(records: Sequence[EvalRecord]) -> float:
    _require(records)
    return sum(r.correct for r in records) / len(records)


def jumping_accuracy(records: Sequence[EvalRecord], tolerance: int = 0) -> float:
    """Correct jump positions among correctly classified, annotated records

    With `tolerance=k` a jump up to k steps before the gold sentence also counts.
    """
    if tolerance < 0:
        raise ValueError(f"tolerance must be non-negative: {tolerance}")
    correct = [r for r in records if r.gold_jump is not None and r.correct]
    if not correct:
        raise UndefinedMetric("Jumping accuracy needs correctly classified, annotated records.")
    return sum(r.jump_correct(tolerance) for r in correct) / len(correct)


def overall_accuracy(records: Sequence[EvalRecord], tolerance: int = 0) -> float:
    annotated = [r for r in records if r.gold_jump is not None]
    return classification_accuracy(annotated) * jumping_accuracy(annotated, tolerance)


def reduced_reading(records: Sequence[EvalRecord]) -> tuple[float, float, float]:
    """(mean sentence count, mean jump step, fraction of text left unread)"""
    _require(records)
    avg_sentences = float(np.mean([r.num_sentences for r in records]))
    avg_jump = float(np.mean([r.pred_jump for r in records]))
    return avg_sentences, avg_jump, 1.0 - avg_jump / avg_sentences


def _by_slot(records: Sequence[EvalRecord]) -> dict[str, list[EvalRecord]]:
    groups: dict[str, list[EvalRecord]] = defaultdict(list)
    for record in records:
        groups[record.slot].append(record)
    return dict(sorted(groups.items()))


def slot_macro_f1(records: Sequence[EvalRecord]) -> float:
    _require(records)
    classes = sorted({r.gold for r in records} | {r.predicted for r in records})
    scores = []
    for cls in classes:
        tp = sum(r.predicted == cls and r.gold == cls for r in records)
        fp = sum(r.predicted == cls and r.gold != cls for r in records)
        fn = sum(r.predicted != cls and r.gold == cls for r in records)
        scores.append(2 * tp / (2 * tp + fp + fn))
    return float(np.mean(scores))


def macro_f1(records: Sequence[EvalRecord]) -> float:
    """Per-slot macro F1 over classes seen in gold or predictions, averaged over slots"""
    _require(records)
    return float(np.mean([slot_macro_f1(group) for group in _by_slot(records).values()]))


def majority_guess(records: Sequence[EvalRecord]) -> dict[str, float]:
    """Frequency of the most common gold class of every slot"""
    _require(records)
    return {
        slot: Counter(r.gold for r in group).most_common(1)[0][1] / len(group)
        for slot, group in _by_slot(records).items()
    }


def _jump_metrics(records: Sequence[EvalRecord], tolerance: int) -> dict[str, float | None]:
    try:
        return {
            "JA": jumping_accuracy(records, tolerance),
            "OA": overall_accuracy(records, tolerance),
        }
    except UndefinedMetric as e:
        logger.warning(str(e))
        return {"JA": None, "OA": None}


def metrics_report(records: Sequence[EvalRecord], tolerance: int = 0) -> dict[str, Any]:
    """CA, reading statistics, F1 and (with gold jumps) JA/OA, pooled and per slot"""
    _require(records)
    has_gold_jumps = any(r.gold_jump is not None for r in records)
    avg_sentences, avg_jump, reduced = reduced_reading(records)

    report: dict[str, Any] = {"CA": classification_accuracy(records)}
    if has_gold_jumps:
        report.update(_jump_metrics(records, tolerance))
        if tolerance:
            report["JA_tolerance"] = tolerance
    report.update(
        {
            "avg_T": avg_sentences,
            "avg_jump": avg_jump,
            "reduced": reduced,
            "macro_F1": macro_f1(records),
            "majority_guess": majority_guess(records),
            "jump_step_counts": {
                str(step): count
                for step, count in sorted(Counter(r.pred_jump for r in records).items())
            },
        }
    )

    per_slot = {}
    for slot, group in _by_slot(records).items():
        entry: dict[str, Any] = {
            "CA": classification_accuracy(group),
            "macro_F1": slot_macro_f1(group),
        }
        if has_gold_jumps and any(r.gold_jump is not None for r in group):
            entry.update(_jump_metrics(group, tolerance))
        per_slot[slot] = entry
    report["per_slot"] = per_slot

    return report
