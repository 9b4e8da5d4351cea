"""End-to-end training runs; enabled with `pytest --slow`"""

import os
from dataclasses import replace

import numpy as np
import pytest

from jumper.cli_utils import fit, to_paragraphs
from jumper.config import RunConfig
from jumper.corpus_parser import CorpusIO
from jumper.evaluation import decode_greedy, evaluate
from jumper.metrics import classification_accuracy, jumping_accuracy, reduced_reading
from jumper.rationale import backtrack_words, select_rationale_dims
from jumper.synthetic import PlantedCorpusConfig, generate_planted_corpus, write_planted_corpus
from jumper.text_data import Holdout, KFold, split_dataset

SLOT = "label"


@pytest.fixture(scope="module")
def planted(tempdir):
    corpus = generate_planted_corpus(PlantedCorpusConfig(num_paragraphs=2000, seed=0))
    paths = write_planted_corpus(corpus, tempdir / "planted")
    split = split_dataset(corpus.examples, Holdout(0.2), seed=0)
    gold_jumps = {key: index + 1 for key, index in corpus.gold_jumps.items()}
    return corpus, split.train, split.dev, gold_jumps, paths["vectors"]


def fit_planted(planted, mode):
    corpus, train_examples, _, _, vectors_path = planted
    config = RunConfig()
    config = replace(
        config,
        train=replace(config.train, mode=mode),
        data=replace(config.data, embeddings_path=str(vectors_path)),
    )
    return fit(config, corpus.schema, train_examples), config


@pytest.fixture(scope="module")
def jumper_run(planted):
    return fit_planted(planted, "reinforce")


@pytest.fixture(scope="module")
def xent_run(planted):
    return fit_planted(planted, "cross_entropy")


def evaluate_run(planted, run):
    _, _, test_examples, gold_jumps, _ = planted
    result, config = run
    paragraphs = to_paragraphs(test_examples, result.vocab, config)
    return paragraphs, evaluate(result.model, paragraphs, config.train.decoding, gold_jumps)


def test_slow_planted_evidence_is_learned(planted, jumper_run):
    _, records = evaluate_run(planted, jumper_run)
    assert classification_accuracy(records) >= 0.95
    assert jumping_accuracy(records) >= 0.90


def test_slow_xent_comparator_jumps_less_accurately(planted, jumper_run, xent_run):
    _, jumper_records = evaluate_run(planted, jumper_run)
    _, xent_records = evaluate_run(planted, xent_run)
    assert jumping_accuracy(xent_records) < jumping_accuracy(jumper_records)


def test_slow_reduced_reading(planted, jumper_run):
    _, records = evaluate_run(planted, jumper_run)
    _, _, reduced = reduced_reading(records)
    assert 0.25 <= reduced <= 0.55


def test_slow_trigger_is_top_rationale_word(planted, jumper_run):
    corpus = planted[0]
    result, config = jumper_run
    paragraphs, records = evaluate_run(planted, jumper_run)

    hits, total = 0, 0
    for paragraph, record in zip(paragraphs, records):
        if not (record.correct and record.jump_correct()):
            continue
        trace = decode_greedy(result.model, paragraph)
        jump_step = trace.jump_steps[SLOT]
        dims, _ = select_rationale_dims(result.model, trace, SLOT, jump_step, config.rationale)
        importance = backtrack_words(dims, trace.step(jump_step).encoding, jump_step - 1)
        hits += importance.top_position() == corpus.trigger_positions[paragraph.id]
        total += 1

    assert total > 0
    assert hits / total >= 0.80


MR_CORPUS = os.getenv("JUMPER_MR_CORPUS")
MR_SCHEMA = os.getenv("JUMPER_MR_SCHEMA")
MR_EMBEDDINGS = os.getenv("JUMPER_MR_EMBEDDINGS")


@pytest.mark.skipif(
    not (MR_CORPUS and MR_SCHEMA and MR_EMBEDDINGS),
    reason="Set JUMPER_MR_CORPUS, JUMPER_MR_SCHEMA and JUMPER_MR_EMBEDDINGS",
)
def test_slow_movie_review_cross_validation():
    config = RunConfig()
    config = replace(config, data=replace(config.data, embeddings_path=MR_EMBEDDINGS))
    schema = CorpusIO.parse_schema(MR_SCHEMA)
    examples = CorpusIO.parse_corpus(MR_CORPUS, schema)
    split = split_dataset(examples, KFold(10), seed=config.train.seed)

    accuracies = []
    for i in range(10):
        train_examples, test_examples = split.fold(i)
        result = fit(config, schema, train_examples)
        paragraphs = to_paragraphs(test_examples, result.vocab, config)
        accuracies.append(classification_accuracy(evaluate(result.model, paragraphs)))

    assert np.mean(accuracies) >= 0.775
