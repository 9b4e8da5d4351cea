import json
import struct

import numpy as np
import pytest

from jumper.checkpoint import MAGIC, Checkpoint
from jumper.config import RunConfig
from jumper.evaluation import decode_dataset
from jumper.exceptions import DataFormatError
from jumper.model import EncoderConfig, JumperModel, ModelConfig
from jumper.text_data import build_vocab, make_paragraph

TEXTS = ["the plot was thin. but the cast was great!", "slow start, weak end.", "great fun"]


@pytest.fixture
def vocab():
    return build_vocab(TEXTS)


@pytest.fixture
def config():
    encoder = EncoderConfig(window_sizes=[1, 2], maps_per_window=3, embed_dim=4)
    return RunConfig(model=ModelConfig(encoder=encoder, hidden_size=3), seed=1)


def build_checkpoint(config, schema, vocab, seed=1):
    model = JumperModel(config.model, schema, len(vocab), seed=seed)
    return Checkpoint.from_model(model, vocab, config, decoding="jumper")


def test_round_trip_is_bit_exact(config, two_slot_schema, vocab):
    checkpoint = build_checkpoint(config, two_slot_schema, vocab)
    loaded = Checkpoint.from_bytes(checkpoint.to_bytes())

    assert loaded.config == checkpoint.config
    assert loaded.schema == two_slot_schema
    assert loaded.vocab.id_to_token == vocab.id_to_token
    assert loaded.decoding == "jumper"
    assert loaded.params.names() == checkpoint.params.names()
    for name, tensor in checkpoint.params.items():
        np.testing.assert_array_equal(loaded.params[name].values, tensor.values)


def test_round_trip_preserves_greedy_decisions(config, two_slot_schema, vocab, tempdir):
    checkpoint = build_checkpoint(config, two_slot_schema, vocab)
    checkpoint.save(tempdir / "model.ckpt")
    loaded = Checkpoint.load(tempdir / "model.ckpt")

    paragraphs = [make_paragraph(text, vocab, id=i) for i, text in enumerate(TEXTS)]
    before = decode_dataset(checkpoint.build_model(), paragraphs)
    after = decode_dataset(loaded.build_model(), paragraphs)
    assert before == after


def test_float64_parameters_are_stored_at_32_bit(config, two_slot_schema, vocab):
    config.model.precision = "float64"
    checkpoint = build_checkpoint(config, two_slot_schema, vocab)
    checkpoint.params["policy.topic.b"].values[0] = 1.0 + 1e-12
    loaded = Checkpoint.from_bytes(checkpoint.to_bytes())

    assert loaded.params["policy.topic.b"].values.dtype == np.float64
    assert loaded.params["policy.topic.b"].values[0] == 1.0
    for name, tensor in checkpoint.params.items():
        expected = tensor.values.astype(np.float32).astype(np.float64)
        np.testing.assert_array_equal(loaded.params[name].values, expected)


def test_same_seed_gives_identical_bytes(config, two_slot_schema, vocab):
    first = build_checkpoint(config, two_slot_schema, vocab, seed=3).to_bytes()
    second = build_checkpoint(config, two_slot_schema, vocab, seed=3).to_bytes()
    other = build_checkpoint(config, two_slot_schema, vocab, seed=4).to_bytes()
    assert first == second
    assert first != other


def test_manifest_lists_parameters_in_order(config, two_slot_schema, vocab):
    manifest = build_checkpoint(config, two_slot_schema, vocab).manifest()
    assert sorted(manifest) == [
        "config",
        "decoding",
        "format_version",
        "parameters",
        "schema",
        "vocab",
    ]
    names = [entry["name"] for entry in manifest["parameters"]]
    assert names == sorted(names)
    assert {"name": "conv.w2", "shape": [3, 8]} in manifest["parameters"]


@pytest.mark.parametrize(
    "corrupt,message",
    [
        (lambda payload: b"NOTJUMPR" + payload[8:], "Not a Jumper checkpoint"),
        (lambda payload: payload[:10], "Truncated checkpoint header"),
        (lambda payload: payload[:-3], "Truncated buffer"),
        (lambda payload: payload + b"\x00", "1 trailing bytes"),
        (lambda payload: MAGIC + payload[8:16] + b"#" + payload[17:], "Corrupt checkpoint"),
    ],
)
def test_corrupt_checkpoint(config, two_slot_schema, vocab, corrupt, message):
    payload = build_checkpoint(config, two_slot_schema, vocab).to_bytes()
    with pytest.raises(DataFormatError, match=message):
        Checkpoint.from_bytes(corrupt(payload))


def rewrite_manifest(payload, edit):
    (length,) = struct.unpack_from("<Q", payload, len(MAGIC))
    start = len(MAGIC) + 8
    manifest = edit(json.loads(payload[start : start + length]))
    encoded = json.dumps(manifest, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(encoded)) + encoded + payload[start + length :]


def without(key):
    def edit(manifest):
        del manifest[key]
        return manifest

    return edit


def without_shape(manifest):
    del manifest["parameters"][0]["shape"]
    return manifest


@pytest.mark.parametrize(
    "edit,message",
    [
        (without("vocab"), "missing 'vocab'"),
        (without("config"), "missing 'config'"),
        (without("schema"), "missing 'schema'"),
        (without("parameters"), "missing 'parameters'"),
        (without_shape, "missing 'shape'"),
        (lambda manifest: [manifest], "not a JSON object"),
    ],
)
def test_incomplete_manifest(config, two_slot_schema, vocab, edit, message):
    payload = build_checkpoint(config, two_slot_schema, vocab).to_bytes()
    with pytest.raises(DataFormatError, match=f"Corrupt checkpoint manifest: {message}"):
        Checkpoint.from_bytes(rewrite_manifest(payload, edit))


def test_unsupported_version(config, two_slot_schema, vocab, monkeypatch):
    payload = build_checkpoint(config, two_slot_schema, vocab).to_bytes()
    monkeypatch.setattr("jumper.checkpoint.FORMAT_VERSION", 2)
    with pytest.raises(DataFormatError, match="Unsupported checkpoint version 1"):
        Checkpoint.from_bytes(payload)


def test_load_missing_file(tempdir):
    with pytest.raises(OSError):
        Checkpoint.load(tempdir / "missing.ckpt")
