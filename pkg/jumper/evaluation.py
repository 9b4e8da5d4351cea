from __future__ import annotations

import concurrent.futures
import logging
import sys
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from tqdm.auto import tqdm

from jumper.metrics import EvalRecord
from jumper.model import EpisodeTrace, JumperModel, final_prediction
from jumper.text_data import Paragraph

Decoding = Literal["jumper", "xent"]

logger = logging.getLogger(__name__)


@dataclass
class Decoded:
    """Greedy decisions for one paragraph"""

    example_id: int
    predictions: dict[str, int]
    jump_steps: dict[str, int]
    num_sentences: int
    jumped: dict[str, bool]


def xent_first_prediction(trace: EpisodeTrace, slot: str) -> tuple[int, int]:
    """First step whose per-step argmax is not "None", and that class; (0, T) otherwise"""
    for step in trace.steps:
        best = int(np.argmax(step.dists[slot]))
        if best != 0:
            return best, step.t
    return 0, trace.T


def decode_trace(
    trace: EpisodeTrace, decoding: Decoding = "jumper", fallback_non_default: bool = False
) -> tuple[dict[str, int], dict[str, int], dict[str, bool]]:
    predictions, jump_steps, jumped = {}, {}, {}
    for slot in trace.slot_names:
        if decoding == "jumper":
            predictions[slot] = final_prediction(trace, slot, fallback_non_default)
            jump_steps[slot] = trace.jump_steps[slot]
            jumped[slot] = trace.jumped(slot)
        else:
            first_class, first_step = xent_first_prediction(trace, slot)
            predictions[slot] = first_class
            if first_class == 0 and fallback_non_default:
                last_dist = trace.steps[-1].dists[slot]
                predictions[slot] = 1 + int(np.argmax(last_dist[1:]))
            jump_steps[slot] = first_step
            jumped[slot] = first_class != 0
    return predictions, jump_steps, jumped


def decode_paragraph(
    model: JumperModel, paragraph: Paragraph, decoding: Decoding = "jumper"
) -> Decoded:
    trace = decode_greedy(model, paragraph, decoding)
    predictions, jump_steps, jumped = decode_trace(
        trace, decoding, model.config.fallback_non_default
    )
    return Decoded(paragraph.id, predictions, jump_steps, trace.T, jumped)


def decode_greedy(
    model: JumperModel, paragraph: Paragraph, decoding: Decoding = "jumper"
) -> EpisodeTrace:
    """Greedy rollout; the cross-entropy classifier reads the whole paragraph"""
    if decoding == "jumper":
        return model.forward_paragraph(paragraph, mode="greedy")
    # States stay "None"; the last distribution is the class prediction
    encodings = model.encode_paragraph(paragraph)
    return model.rollout(encodings, forced_actions=model.none_actions(len(encodings)))


def decode_dataset(
    model: JumperModel,
    paragraphs: Sequence[Paragraph],
    decoding: Decoding = "jumper",
    max_workers: int = 1,
    show_progress: bool = False,
) -> list[Decoded]:
    """Decode every paragraph; results keep the input order"""
    if max_workers <= 1 or len(paragraphs) <= 1:
        iterator = tqdm(paragraphs, file=sys.stderr, disable=not show_progress)
        return [decode_paragraph(model, paragraph, decoding) for paragraph in iterator]

    results: list[Decoded | None] = [None] * len(paragraphs)
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_index = {
            executor.submit(decode_paragraph, model, paragraph, decoding): i
            for i, paragraph in enumerate(paragraphs)
        }
        with tqdm(total=len(paragraphs), file=sys.stderr, disable=not show_progress) as pbar:
            for future in concurrent.futures.as_completed(future_to_index):
                results[future_to_index[future]] = future.result()
                pbar.update(1)

    return results  # type: ignore[return-value]


def to_eval_records(
    decoded: Sequence[Decoded],
    paragraphs: Sequence[Paragraph],
    model: JumperModel,
    gold_jumps: Mapping[tuple[int, str], int] | None = None,
) -> list[EvalRecord]:
    records = []
    for result, paragraph in zip(decoded, paragraphs):
        for slot in model.slot_names:
            gold_jump = None
            if gold_jumps is not None:
                gold_jump = gold_jumps.get((paragraph.id, slot))
                if gold_jump is not None and gold_jump > paragraph.num_sentences:
                    logger.warning(
                        f"Example {paragraph.id}: gold jump {gold_jump} beyond "
                        f"{paragraph.num_sentences} sentences, ignored"
                    )
                    gold_jump = None
            records.append(
                EvalRecord(
                    example_id=paragraph.id,
                    slot=slot,
                    predicted=result.predictions[slot],
                    gold=paragraph.gold_index(model.schema, slot),
                    pred_jump=result.jump_steps[slot],
                    gold_jump=gold_jump,
                    num_sentences=result.num_sentences,
                )
            )
    return records


def evaluate(
    model: JumperModel,
    paragraphs: Sequence[Paragraph],
    decoding: Decoding = "jumper",
    gold_jumps: Mapping[tuple[int, str], int] | None = None,
    max_workers: int = 1,
) -> list[EvalRecord]:
    decoded = decode_dataset(model, paragraphs, decoding, max_workers)
    return to_eval_records(decoded, paragraphs, model, gold_jumps)
