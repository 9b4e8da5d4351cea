from __future__ import annotations

import json
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from jumper.exceptions import DataFormatError, SchemaMismatch
from jumper.text_data import (
    NONE_CLASS,
    PAD_ID,
    EmbeddingTable,
    SlotSchema,
    Vocabulary,
)

logger = logging.getLogger(__name__)


@dataclass
class LabeledText:
    id: int
    text: str
    labels: dict[str, str | None] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "text": self.text, "labels": self.labels}


class CorpusIO:
    """Readers and writers for the corpus, schema and rationale-gold files

    Corpus: JSON-lines `{"text": str, "labels": {slot: class | null}}`, optional `"id"`.
    Schema: JSON `{"slots": [{"name": str, "classes": [str, ...]}]}`.
    Rationale gold: JSON-lines `{"id": int, "slot": str, "gold_jump": int}` with a
    0-based sentence index; it is returned as a 1-based step.
    """

    @staticmethod
    def parse_schema(filepath: str | Path) -> SlotSchema:
        with open(filepath, encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise DataFormatError(f"Invalid JSON: {e.msg}", filepath, e.lineno)
        try:
            return SlotSchema.from_dict(data)
        except (KeyError, TypeError) as e:
            raise DataFormatError(
                f"Schema needs 'slots' with 'name' and 'classes' ({e})", filepath
            )
        except SchemaMismatch as e:
            raise DataFormatError(str(e), filepath)

    @staticmethod
    def parse_corpus(filepath: str | Path, schema: SlotSchema | None = None) -> list[LabeledText]:
        examples = []
        for lineno, record in CorpusIO._iter_json_lines(filepath):
            text = record.get("text")
            if not isinstance(text, str):
                raise DataFormatError("'text' must be a string", filepath, lineno)
            labels = record.get("labels", {})
            if not isinstance(labels, dict):
                raise DataFormatError("'labels' must be an object", filepath, lineno)
            labels = {
                str(k): (None if v in (None, NONE_CLASS) else str(v)) for k, v in labels.items()
            }

            if schema is not None:
                for slot, class_name in labels.items():
                    if slot not in schema:
                        raise DataFormatError(f"Unknown slot '{slot}'", filepath, lineno)
                    if class_name is not None and class_name not in schema.slot(slot).classes:
                        raise DataFormatError(
                            f"Unknown class '{class_name}' for slot '{slot}'", filepath, lineno
                        )
                labels = {slot: labels.get(slot) for slot in schema.names()}

            example_id = record.get("id", len(examples))
            if not isinstance(example_id, int):
                raise DataFormatError("'id' must be an integer", filepath, lineno)
            examples.append(LabeledText(example_id, text, labels))

        logger.debug(f"Read {len(examples)} examples from {filepath}")
        return examples

    @staticmethod
    def parse_rationale_gold(filepath: str | Path) -> dict[tuple[int, str], int]:
        gold = {}
        for lineno, record in CorpusIO._iter_json_lines(filepath):
            try:
                key = (int(record["id"]), str(record["slot"]))
                sentence_index = int(record["gold_jump"])
            except (KeyError, TypeError, ValueError):
                raise DataFormatError("Expected 'id', 'slot' and 'gold_jump'", filepath, lineno)
            if sentence_index < 0:
                raise DataFormatError("'gold_jump' must be non-negative", filepath, lineno)
            gold[key] = sentence_index + 1

        return gold

    @staticmethod
    def write_corpus(examples: Iterable[LabeledText], filepath: str | Path):
        with open(filepath, "w", encoding="utf-8") as f:
            for example in examples:
                f.write(json.dumps(example.to_json(), ensure_ascii=False) + "\n")

    @staticmethod
    def write_schema(schema: SlotSchema, filepath: str | Path):
        with open(filepath, "w", encoding="utf-8") as f:
            json.dump(schema.to_dict(), f, indent=2)

    @staticmethod
    def _iter_json_lines(filepath: str | Path):
        with open(filepath, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DataFormatError(f"Invalid JSON: {e.msg}", filepath, lineno)
                if not isinstance(record, dict):
                    raise DataFormatError("Expected a JSON object", filepath, lineno)
                yield lineno, record


def load_pretrained_embeddings(
    filepath: str | Path,
    vocab: Vocabulary,
    dim: int | None = None,
    rng: np.random.Generator | None = None,
    scale: float = 0.01,
) -> EmbeddingTable:
    """Rows for tokens found in a `token v1 ... vd` text file; the rest uniform[-scale, scale]

    The PAD row is always zero.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    vectors: dict[int, np.ndarray] = {}
    file_dim = None

    with open(filepath, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            fields = line.split()
            if len(fields) < 2:
                if line.strip():
                    raise DataFormatError("Expected a token followed by values", filepath, lineno)
                continue
            if file_dim is None:
                file_dim = len(fields) - 1
                if dim is not None and file_dim != dim:
                    raise DataFormatError(
                        f"Expected {dim} values but found {file_dim}", filepath, lineno
                    )
            elif len(fields) - 1 != file_dim:
                raise DataFormatError(
                    f"Expected {file_dim} values but found {len(fields) - 1}", filepath, lineno
                )

            token_id = vocab.token_to_id.get(fields[0])
            if token_id is None or token_id == PAD_ID:
                continue
            try:
                vectors[token_id] = np.array(fields[1:], dtype=np.float64)
            except ValueError:
                raise DataFormatError("Non-numeric embedding value", filepath, lineno)

    if file_dim is None:
        raise DataFormatError("No vectors found", filepath)

    matrix = rng.uniform(-scale, scale, size=(len(vocab), file_dim))
    matrix[PAD_ID] = 0.0
    pretrained = np.zeros(len(vocab), dtype=bool)
    for token_id, vector in vectors.items():
        matrix[token_id] = vector
        pretrained[token_id] = True

    coverage = pretrained.sum() / max(1, len(vocab) - 1)
    logger.info(
        f"Pretrained vectors cover {pretrained.sum()} tokens ({coverage:.1%}) of {filepath}"
    )
    return EmbeddingTable(matrix, pretrained)
