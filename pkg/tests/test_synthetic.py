import numpy as np
import pytest

from jumper.corpus_parser import CorpusIO, load_pretrained_embeddings
from jumper.synthetic import (
    PlantedCorpusConfig,
    generate_planted_corpus,
    trigger_token,
    write_planted_corpus,
)
from jumper.text_data import PAD_ID, UNK_ID, build_vocab, segment_paragraph, tokenize


@pytest.fixture(scope="module")
def corpus():
    return generate_planted_corpus(PlantedCorpusConfig(num_paragraphs=50, seed=3))


def test_planted_corpus_shape(corpus):
    assert len(corpus.examples) == 50
    assert corpus.schema.names() == ["label"]
    assert corpus.schema.slot("label").classes == ("class0", "class1", "class2")

    for example in corpus.examples:
        sentences = segment_paragraph(example.text)
        assert 4 <= len(sentences) <= 6
        gold = corpus.gold_jumps[(example.id, "label")]
        label = int(example.labels["label"].removeprefix("class"))

        for i, sentence in enumerate(sentences):
            tokens = tokenize(sentence)
            assert 5 <= len(tokens) - 1 <= 9
            triggers = [t for t in tokens if t.startswith("key")]
            if i == gold:
                assert triggers == [trigger_token(label)]
                assert tokens[corpus.trigger_positions[example.id]] == trigger_token(label)
            else:
                assert triggers == []


def test_planted_corpus_is_seeded(corpus):
    again = generate_planted_corpus(PlantedCorpusConfig(num_paragraphs=50, seed=3))
    other = generate_planted_corpus(PlantedCorpusConfig(num_paragraphs=50, seed=4))
    assert again.examples == corpus.examples
    assert other.examples != corpus.examples


def test_word_vectors_cover_the_corpus(corpus):
    tokens = {token for example in corpus.examples for token in tokenize(example.text)}
    assert tokens <= set(corpus.vectors)
    stacked = np.stack(list(corpus.vectors.values()))
    assert stacked.shape == (54, 300)
    assert stacked.std() == pytest.approx(0.4, rel=0.05)


def test_trigger_sentences_cover_positions():
    corpus = generate_planted_corpus(PlantedCorpusConfig(num_paragraphs=300))
    assert set(corpus.gold_jumps.values()) == set(range(6))


def test_write_planted_corpus(corpus, tempdir):
    paths = write_planted_corpus(corpus, tempdir / "planted")

    schema = CorpusIO.parse_schema(paths["schema"])
    assert schema == corpus.schema
    assert CorpusIO.parse_corpus(paths["corpus"], schema) == corpus.examples

    gold = CorpusIO.parse_rationale_gold(paths["rationale_gold"])
    assert gold == {key: index + 1 for key, index in corpus.gold_jumps.items()}

    vocab = build_vocab(example.text for example in corpus.examples)
    table = load_pretrained_embeddings(paths["vectors"], vocab, dim=300)
    covered = [i for i in range(len(vocab)) if i not in (PAD_ID, UNK_ID)]
    assert table.pretrained[covered].all()
    np.testing.assert_allclose(
        table.matrix[vocab.token_to_id["key0"]], corpus.vectors["key0"], atol=1e-6
    )


@pytest.mark.parametrize(
    "kwargs",
    [
        {"num_paragraphs": 0},
        {"min_sentences": 5, "max_sentences": 4},
        {"min_words": 0},
        {"vector_scale": 0.0},
    ],
)
def test_planted_corpus_config_validation(kwargs):
    with pytest.raises(ValueError):
        PlantedCorpusConfig(**kwargs)
