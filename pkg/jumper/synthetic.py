from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from jumper.corpus_parser import CorpusIO, LabeledText
from jumper.text_data import Slot, SlotSchema
from jumper.types import FloatArray

logger = logging.getLogger(__name__)


@dataclass
class PlantedCorpusConfig:
    """Paragraphs of filler sentences where one sentence holds a class-determining trigger

    Pretrained vectors do not cover the made-up tokens, so the corpus carries its own:
    `vector_dim` coordinates per token drawn from N(0, vector_scale^2), the magnitude of
    300d GloVe coordinates.
    """

    num_paragraphs: int = 2000
    num_classes: int = 3
    min_sentences: int = 4
    max_sentences: int = 6
    min_words: int = 5
    max_words: int = 9
    num_filler_words: int = 50
    slot_name: str = "label"
    vector_dim: int = 300
    vector_scale: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.num_paragraphs < 1 or self.num_classes < 1:
            raise ValueError("num_paragraphs and num_classes must be positive")
        if not 1 <= self.min_sentences <= self.max_sentences:
            raise ValueError("Need 1 <= min_sentences <= max_sentences")
        if not 1 <= self.min_words <= self.max_words:
            raise ValueError("Need 1 <= min_words <= max_words")
        if self.vector_dim < 1 or self.vector_scale <= 0.0:
            raise ValueError("vector_dim and vector_scale must be positive")


@dataclass
class PlantedCorpus:
    examples: list[LabeledText]
    schema: SlotSchema
    gold_jumps: dict[tuple[int, str], int]
    """(id, slot) -> 0-based index of the trigger sentence"""
    trigger_positions: dict[int, int]
    """id -> word position of the trigger inside its sentence"""
    vectors: dict[str, FloatArray] = field(default_factory=dict)
    """Word vectors for every token of the corpus"""


def class_names(num_classes: int) -> list[str]:
    return [f"class{k}" for k in range(num_classes)]


def trigger_token(class_index: int) -> str:
    return f"key{class_index}"


def generate_planted_corpus(cfg: PlantedCorpusConfig | None = None) -> PlantedCorpus:
    cfg = cfg if cfg is not None else PlantedCorpusConfig()
    rng = np.random.default_rng(cfg.seed)
    fillers = [f"w{i}" for i in range(cfg.num_filler_words)]
    classes = class_names(cfg.num_classes)

    examples, gold_jumps, trigger_positions = [], {}, {}
    for example_id in range(cfg.num_paragraphs):
        label = int(rng.integers(cfg.num_classes))
        num_sentences = int(rng.integers(cfg.min_sentences, cfg.max_sentences + 1))
        trigger_sentence = int(rng.integers(num_sentences))

        sentences = []
        for i in range(num_sentences):
            num_words = int(rng.integers(cfg.min_words, cfg.max_words + 1))
            words = [fillers[j] for j in rng.integers(len(fillers), size=num_words)]
            if i == trigger_sentence:
                position = int(rng.integers(num_words))
                words[position] = trigger_token(label)
                trigger_positions[example_id] = position
            sentences.append(" ".join(words) + " .")

        labels = {cfg.slot_name: classes[label]}
        examples.append(LabeledText(example_id, " ".join(sentences), labels))
        gold_jumps[(example_id, cfg.slot_name)] = trigger_sentence

    tokens = [*fillers, *(trigger_token(k) for k in range(cfg.num_classes)), "."]
    vectors = {token: rng.normal(0.0, cfg.vector_scale, size=cfg.vector_dim) for token in tokens}

    schema = SlotSchema([Slot(cfg.slot_name, tuple(classes))])
    logger.info(f"Generated {len(examples)} planted-evidence paragraphs")
    return PlantedCorpus(examples, schema, gold_jumps, trigger_positions, vectors)


def write_planted_corpus(corpus: PlantedCorpus, output_dir: str | Path) -> dict[str, Path]:
    """corpus.jsonl, schema.json, rationale_gold.jsonl and vectors.txt under `output_dir`"""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": output_dir / "corpus.jsonl",
        "schema": output_dir / "schema.json",
        "rationale_gold": output_dir / "rationale_gold.jsonl",
        "vectors": output_dir / "vectors.txt",
    }

    CorpusIO.write_corpus(corpus.examples, paths["corpus"])
    CorpusIO.write_schema(corpus.schema, paths["schema"])
    with open(paths["rationale_gold"], "w", encoding="utf-8") as f:
        for (example_id, slot), sentence_index in sorted(corpus.gold_jumps.items()):
            record = {"id": example_id, "slot": slot, "gold_jump": sentence_index}
            f.write(json.dumps(record) + "\n")
    with open(paths["vectors"], "w", encoding="utf-8") as f:
        for token, vector in corpus.vectors.items():
            f.write(" ".join([token, *(f"{value:.6f}" for value in vector)]) + "\n")

    return paths
