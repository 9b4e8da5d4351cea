from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from jumper.evaluation import Decoding, decode_greedy, decode_trace, xent_first_prediction
from jumper.exceptions import ConfigError, FirstStepJump, UnknownSlot
from jumper.model import EpisodeTrace, JumperModel, SentenceEncoding
from jumper.nn import log_softmax_grad
from jumper.text_data import Paragraph, tokenize
from jumper.types import FloatArray

logger = logging.getLogger(__name__)


@dataclass
class RationaleConfig:
    top_d: int = 10

    def __post_init__(self):
        if self.top_d < 1:
            raise ValueError(f"top_d must be >= 1: {self.top_d}")


@dataclass
class WordImportance:
    sentence_index: int
    """0-based index of the sentence the words belong to"""
    weights: dict[int, float] = field(default_factory=dict)
    """Word position -> fraction of the selected features traced back to it"""

    def top_position(self) -> int | None:
        if not self.weights:
            return None
        return min(self.weights, key=lambda position: (-self.weights[position], position))


def log_policy_gradient(
    model: JumperModel, trace: EpisodeTrace, slot: str, t: int, target: int, wrt_step: int
) -> FloatArray:
    """d log p_t(target) / d c of step `wrt_step`, by backpropagation through the controller"""
    if not 1 <= wrt_step <= t <= trace.T:
        raise ValueError(f"Cannot take step {t} with respect to step {wrt_step}")
    dist = trace.step(t).dists[slot]
    model.backward(trace, {(t, slot): log_softmax_grad(dist, target)}, through_encoder=False)
    gradient = trace.step(wrt_step).encoding.c.grad.copy()
    model.params.zero_grad()
    trace.zero_grad()
    return gradient


def select_top_dims(
    gradient: FloatArray, c_t: FloatArray, c_prev: FloatArray, top_d: int
) -> list[int]:
    """Indices of the `top_d` largest gradient * (c_t - c_prev)^2 (ties -> lowest index)"""
    scores = gradient * (c_t - c_prev) ** 2
    order = np.argsort(-scores, kind="stable")
    return sorted(int(d) for d in order[: min(top_d, len(order))])


def _jump_target(trace: EpisodeTrace, slot: str, t: int, target: int | None) -> int:
    return trace.state(slot, t).index if target is None else target


def top_d_dims(
    model: JumperModel,
    trace: EpisodeTrace,
    slot: str,
    t: int,
    cfg: RationaleConfig,
    target: int | None = None,
) -> list[int]:
    """Features whose change from sentence t-1 to t most raised the jump probability

    `target` defaults to the class the slot jumped to at step t.
    """
    if t == 1:
        raise FirstStepJump()
    target = _jump_target(trace, slot, t, target)
    gradient = log_policy_gradient(model, trace, slot, t, target, wrt_step=t - 1)
    c_t = trace.step(t).encoding.c.values
    c_prev = trace.step(t - 1).encoding.c.values
    return select_top_dims(gradient, c_t, c_prev, cfg.top_d)


def select_rationale_dims(
    model: JumperModel,
    trace: EpisodeTrace,
    slot: str,
    t: int,
    cfg: RationaleConfig,
    target: int | None = None,
) -> tuple[list[int], bool]:
    """`top_d_dims`, or at t = 1 the gradient on c_1 against an all-zero previous encoding

    Returns the dimensions and whether the first-step rule was used.
    """
    try:
        return top_d_dims(model, trace, slot, t, cfg, target), False
    except FirstStepJump:
        target = _jump_target(trace, slot, t, target)
        gradient = log_policy_gradient(model, trace, slot, 1, target, wrt_step=1)
        c_1 = trace.step(1).encoding.c.values
        return select_top_dims(gradient, c_1, np.zeros_like(c_1), cfg.top_d), True


def backtrack_words(
    dims: Sequence[int], encoding: SentenceEncoding, sentence_index: int = 0
) -> WordImportance:
    """Trace every selected feature through its max-pool argmax to the words of its window

    A window of size h gives 1/h to every real word it covers; padding gets nothing.
    Weights are normalised by the total credit handed out.
    """
    credit: dict[int, float] = defaultdict(float)
    for d in dims:
        start = int(encoding.pool_argmax[d])
        window = int(encoding.window_of_dim[d])
        for position in range(start, min(start + window, encoding.num_tokens)):
            credit[position] += 1.0 / window

    total = sum(credit.values())
    if total == 0.0:
        return WordImportance(sentence_index)
    weights = {position: value / total for position, value in sorted(credit.items())}
    return WordImportance(sentence_index, weights)


def explain_paragraph(
    model: JumperModel,
    paragraph: Paragraph,
    cfg: RationaleConfig,
    slots: Sequence[str] | None = None,
    decoding: Decoding = "jumper",
) -> dict[str, Any]:
    """Per-step decision distributions, jump steps and word rationales for one paragraph"""
    if cfg.top_d > model.num_features:
        raise ConfigError(
            f"top_d ({cfg.top_d}) exceeds the number of sentence features ({model.num_features})."
        )
    if slots is None:
        slots = model.slot_names
    for slot in slots:
        if slot not in model.schema:
            raise UnknownSlot(slot, model.slot_names)

    trace = decode_greedy(model, paragraph, decoding)
    predictions, jump_steps, jumped = decode_trace(
        trace, decoding, model.config.fallback_non_default
    )

    explanations = []
    for slot in slots:
        jump_step = jump_steps[slot]
        record: dict[str, Any] = {
            "slot": slot,
            "prediction": model.schema.class_name(slot, predictions[slot]),
            "jumped": jumped[slot],
            "jump_step": jump_step,
            "actions": [model.schema.slot(slot).actions[a] for a in trace.actions(slot)],
            "distributions": [[float(p) for p in dist] for dist in trace.dists(slot)],
            "dims": [],
            "word_importance": [],
        }
        if not jumped[slot]:
            if model.config.fallback_non_default:
                record["fallback_prediction"] = record["prediction"]
            explanations.append(record)
            continue

        target = xent_first_prediction(trace, slot)[0] if decoding == "xent" else None
        dims, first_step_rule = select_rationale_dims(model, trace, slot, jump_step, cfg, target)
        importance = backtrack_words(dims, trace.step(jump_step).encoding, jump_step - 1)
        tokens = tokenize(paragraph.raw_sentences[jump_step - 1])
        record["dims"] = dims
        record["first_step_rule"] = first_step_rule
        record["word_importance"] = [
            {
                "position": position,
                "token": tokens[position] if position < len(tokens) else None,
                "weight": weight,
            }
            for position, weight in importance.weights.items()
        ]
        explanations.append(record)

    return {
        "id": paragraph.id,
        "num_sentences": paragraph.num_sentences,
        "sentences": paragraph.raw_sentences,
        "explanations": explanations,
    }
