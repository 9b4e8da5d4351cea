from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from jumper.checkpoint import Checkpoint
from jumper.config import RunConfig
from jumper.corpus_parser import CorpusIO, LabeledText, load_pretrained_embeddings
from jumper.exceptions import UsageError
from jumper.model import JumperModel
from jumper.text_data import (
    Holdout,
    Paragraph,
    SlotSchema,
    Vocabulary,
    build_vocab,
    make_paragraph,
    split_dataset,
)
from jumper.training import TrainingReport, train

logger = logging.getLogger(__name__)


@dataclass
class FitResult:
    model: JumperModel
    vocab: Vocabulary
    report: TrainingReport

    def checkpoint(self, config: RunConfig) -> Checkpoint:
        return Checkpoint.from_model(self.model, self.vocab, config, config.train.decoding)


def _is_file(input_data: str) -> bool:
    try:
        return Path(input_data).is_file()
    except (OSError, ValueError):
        # Too long or otherwise unusable as a path
        return False


def load_input_text(input_data: str, load_from: Literal["auto", "string", "file"] = "auto") -> str:
    """Raw text given inline or as a path to a text file"""
    if load_from == "file" or (load_from == "auto" and _is_file(input_data)):
        with open(input_data, encoding="utf-8") as f:
            return f.read()
    return input_data


def resolve_schema(config: RunConfig, schema_path: str | None) -> SlotSchema:
    schema_path = schema_path or config.data.schema_path
    if schema_path is None:
        raise UsageError("A slot schema is required (--schema or data.schema_path).")
    if not Path(schema_path).exists():
        raise UsageError(f"Schema file not found: {schema_path}")
    return CorpusIO.parse_schema(schema_path)


def to_paragraphs(
    examples: Sequence[LabeledText], vocab: Vocabulary, config: RunConfig
) -> list[Paragraph]:
    return [
        make_paragraph(
            example.text,
            vocab,
            example.labels,
            example.id,
            max_tokens=config.data.max_tokens,
            max_sentences=config.data.max_sentences,
        )
        for example in examples
    ]


def fit(
    config: RunConfig,
    schema: SlotSchema,
    train_examples: Sequence[LabeledText],
    dev_examples: Sequence[LabeledText] | None = None,
) -> FitResult:
    """Vocabulary, embeddings and model from the training texts, then training

    Without `dev_examples` a holdout of `data.dev_fraction` is carved from the training set.
    """
    if dev_examples is None:
        split = split_dataset(
            list(train_examples), Holdout(config.data.dev_fraction), seed=config.train.seed
        )
        train_examples, dev_examples = split.train, split.dev
        logger.info(f"Holdout split: {len(train_examples)} train / {len(dev_examples)} dev")

    vocab = build_vocab((example.text for example in train_examples), config.data.min_count)
    embeddings = None
    if config.data.embeddings_path is not None:
        embeddings = load_pretrained_embeddings(
            config.data.embeddings_path,
            vocab,
            dim=config.model.encoder.embed_dim,
            rng=np.random.default_rng(config.seed),
        )

    model = JumperModel(config.model, schema, len(vocab), seed=config.seed, embeddings=embeddings)
    report = train(
        model,
        to_paragraphs(train_examples, vocab, config),
        to_paragraphs(dev_examples, vocab, config),
        config.train,
        config.reward,
    )
    return FitResult(model, vocab, report)
