from __future__ import annotations

import logging
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any, Generic

import numpy as np

from jumper.exceptions import EmptyInput, SchemaMismatch
from jumper.types import FloatArray, T

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1
NONE_CLASS = "None"

SEGMENT_DELIMITERS = ",.!?"
SEGMENT_PATTERN = re.compile(r"[^,.!?]*[,.!?]|[^,.!?]+$")
TOKEN_PATTERN = re.compile(r"\w+(?:[-'’]\w+)*|[^\w\s]")

logger = logging.getLogger(__name__)


@dataclass
class DataConfig:
    schema_path: str | None = None
    embeddings_path: str | None = None
    max_tokens: int = 60
    max_sentences: int = 30
    min_count: int = 1
    dev_fraction: float = 0.05
    kfold: int = 10


@dataclass
class Vocabulary:
    id_to_token: list[str]
    token_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.id_to_token[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ValueError(f"Vocabulary must start with {PAD_TOKEN!r} and {UNK_TOKEN!r}")
        self.token_to_id = {token: i for i, token in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("Vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.token_to_id.get(token, UNK_ID) for token in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]


@dataclass
class EmbeddingTable:
    matrix: FloatArray
    pretrained: np.ndarray
    """Per-row flag: True if the row came from a pretrained vector file"""

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.pretrained.shape != (self.matrix.shape[0],):
            raise ValueError("Embedding matrix and provenance flags do not agree")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Slot:
    name: str
    classes: tuple[str, ...]

    @property
    def num_actions(self) -> int:
        return len(self.classes) + 1

    @property
    def actions(self) -> tuple[str, ...]:
        return (NONE_CLASS, *self.classes)


@dataclass
class SlotSchema:
    """Slots and their classes; action 0 of every slot is "None"."""

    slots: list[Slot]

    def __post_init__(self):
        if not self.slots:
            raise SchemaMismatch("A schema needs at least one slot.")
        names = [slot.name for slot in self.slots]
        if len(set(names)) != len(names):
            raise SchemaMismatch(f"Slot names must be unique: {names}")
        for slot in self.slots:
            if not slot.classes:
                raise SchemaMismatch(f"Slot '{slot.name}' has no classes.")
            if len(set(slot.classes)) != len(slot.classes):
                raise SchemaMismatch(f"Class names of slot '{slot.name}' must be unique.")
            if NONE_CLASS in slot.classes:
                raise SchemaMismatch(f"'{NONE_CLASS}' is reserved (slot '{slot.name}').")
        self._by_name = {slot.name: slot for slot in self.slots}

    def __len__(self) -> int:
        return len(self.slots)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def names(self) -> list[str]:
        return [slot.name for slot in self.slots]

    def slot(self, name: str) -> Slot:
        return self._by_name[name]

    def num_actions(self, name: str) -> int:
        return self._by_name[name].num_actions

    def class_index(self, name: str, class_name: str | None) -> int:
        if class_name is None or class_name == NONE_CLASS:
            return 0
        return self._by_name[name].classes.index(class_name) + 1

    def class_name(self, name: str, index: int) -> str:
        return self._by_name[name].actions[index]

    def to_dict(self) -> dict[str, Any]:
        return {"slots": [{"name": s.name, "classes": list(s.classes)} for s in self.slots]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SlotSchema:
        return cls(
            [Slot(str(s["name"]), tuple(str(c) for c in s["classes"])) for s in data["slots"]]
        )


@dataclass
class Paragraph:
    sentences: list[list[int]]
    raw_sentences: list[str]
    labels: dict[str, str | None] = field(default_factory=dict)
    id: int = 0

    def __post_init__(self):
        if not self.sentences:
            raise EmptyInput(f"Paragraph {self.id} has no sentences.")
        if len(self.sentences) != len(self.raw_sentences):
            raise ValueError(f"Paragraph {self.id}: raw and tokenized sentences differ in number")

    @property
    def num_sentences(self) -> int:
        return len(self.sentences)

    def gold_index(self, schema: SlotSchema, slot: str) -> int:
        return schema.class_index(slot, self.labels.get(slot))


@dataclass
class DatasetSplit(Generic[T]):
    train: list[T]
    dev: list[T]
    folds: list[list[T]] = field(default_factory=list)

    def fold(self, index: int) -> tuple[list[T], list[T]]:
        """(train, test) for the `index`-th fold"""
        test = self.folds[index]
        train = [item for i, fold in enumerate(self.folds) if i != index for item in fold]
        return train, test


@dataclass(frozen=True)
class Holdout:
    dev_fraction: float = 0.05


@dataclass(frozen=True)
class KFold:
    k: int = 10


def segment_paragraph(text: str) -> list[str]:
    """Split after every , . ! ? keeping the delimiter on the left segment."""
    if not text or not text.strip():
        raise EmptyInput("Cannot segment empty text.")

    segments = []
    for segment in SEGMENT_PATTERN.findall(text):
        segment = segment.strip()
        if segment.rstrip(SEGMENT_DELIMITERS).strip():
            segments.append(segment)
    if not segments:
        raise EmptyInput(f"No sentences found in text: {text!r}")

    return segments


def tokenize(sentence: str) -> list[str]:
    return TOKEN_PATTERN.findall(sentence.lower())


def build_vocab(corpus: Iterable[str | Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Tokens by descending frequency (ties lexicographic) after the reserved ids"""
    counts: Counter[str] = Counter()
    num_items = 0
    for item in corpus:
        num_items += 1
        counts.update(tokenize(item) if isinstance(item, str) else item)
    if num_items == 0:
        raise EmptyInput("Cannot build a vocabulary from an empty corpus.")

    counts.pop(PAD_TOKEN, None)
    counts.pop(UNK_TOKEN, None)
    kept = sorted(
        (token for token, count in counts.items() if count >= min_count),
        key=lambda token: (-counts[token], token),
    )
    logger.debug(f"Vocabulary: {len(kept)} of {len(counts)} token types kept")

    return Vocabulary([PAD_TOKEN, UNK_TOKEN, *kept])


def random_embeddings(
    vocab_size: int, dim: int, rng: np.random.Generator, scale: float = 0.01
) -> EmbeddingTable:
    matrix = rng.uniform(-scale, scale, size=(vocab_size, dim))
    matrix[PAD_ID] = 0.0
    return EmbeddingTable(matrix, np.zeros(vocab_size, dtype=bool))


def make_paragraph(
    text: str,
    vocab: Vocabulary,
    labels: dict[str, str | None] | None = None,
    id: int = 0,
    max_tokens: int = 60,
    max_sentences: int = 30,
) -> Paragraph:
    raw_sentences = segment_paragraph(text)
    if len(raw_sentences) > max_sentences:
        logger.warning(
            f"Paragraph {id}: {len(raw_sentences)} sentences truncated to {max_sentences}"
        )
        raw_sentences = raw_sentences[:max_sentences]

    sentences = []
    for raw in raw_sentences:
        tokens = tokenize(raw)
        if len(tokens) > max_tokens:
            logger.warning(f"Paragraph {id}: sentence of {len(tokens)} tokens truncated")
            tokens = tokens[:max_tokens]
        sentences.append(vocab.encode(tokens))

    return Paragraph(sentences, raw_sentences, dict(labels or {}), id)


def split_dataset(data: Sequence[T], scheme: Holdout | KFold, seed: int = 0) -> DatasetSplit[T]:
    num_items = len(data)
    order = np.random.default_rng(seed).permutation(num_items)

    if isinstance(scheme, Holdout):
        if not 0.0 <= scheme.dev_fraction < 1.0:
            raise ValueError(f"dev_fraction must lie in [0, 1): {scheme.dev_fraction}")
        num_dev = int(round(num_items * scheme.dev_fraction))
        dev = [data[i] for i in sorted(order[:num_dev])]
        train = [data[i] for i in sorted(order[num_dev:])]
        return DatasetSplit(train=train, dev=dev)

    if scheme.k < 2 or scheme.k > num_items:
        raise ValueError(f"Cannot make {scheme.k} folds from {num_items} items")
    folds = [[data[i] for i in sorted(part)] for part in np.array_split(order, scheme.k)]
    return DatasetSplit(train=[], dev=[], folds=folds)
