from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from jumper.config import RunConfig
from jumper.evaluation import Decoding
from jumper.exceptions import DataFormatError
from jumper.model import JumperModel
from jumper.nn import ParamStore
from jumper.text_data import SlotSchema, Vocabulary
from jumper.utils import generate_stable_id

MAGIC = b"JUMPER01"
FORMAT_VERSION = 1
STORED_DTYPE = np.dtype("<f4")
_LENGTH = struct.Struct("<Q")

logger = logging.getLogger(__name__)


@dataclass
class Checkpoint:
    """Trained model with everything needed to decode new text

    File layout: 8-byte magic, little-endian uint64 manifest length, UTF-8 JSON manifest
    (sorted keys), then one little-endian float32 buffer per parameter in manifest order.
    Values are stored at 32-bit whatever the compute precision.
    """

    config: RunConfig
    schema: SlotSchema
    vocab: Vocabulary
    params: ParamStore
    decoding: Decoding = "jumper"

    @classmethod
    def from_model(
        cls, model: JumperModel, vocab: Vocabulary, config: RunConfig, decoding: Decoding
    ) -> Checkpoint:
        return cls(config, model.schema, vocab, model.params, decoding)

    def build_model(self) -> JumperModel:
        return JumperModel(
            self.config.model, self.schema, len(self.vocab), params=self.params
        )

    def manifest(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "decoding": self.decoding,
            "schema": self.schema.to_dict(),
            "vocab": self.vocab.id_to_token,
            "parameters": [
                {"name": name, "shape": list(tensor.shape)} for name, tensor in self.params.items()
            ],
        }

    def to_bytes(self) -> bytes:
        manifest = json.dumps(self.manifest(), sort_keys=True, ensure_ascii=False).encode("utf-8")
        chunks = [MAGIC, _LENGTH.pack(len(manifest)), manifest]
        for _, tensor in self.params.items():
            chunks.append(np.ascontiguousarray(tensor.values, dtype=STORED_DTYPE).tobytes())
        return b"".join(chunks)

    def save(self, filepath: str | Path):
        payload = self.to_bytes()
        with open(filepath, "wb") as f:
            f.write(payload)
        logger.info(f"Saved checkpoint to {filepath} (sha1 {generate_stable_id(payload)[:12]})")

    @classmethod
    def load(cls, filepath: str | Path) -> Checkpoint:
        with open(filepath, "rb") as f:
            payload = f.read()
        return cls.from_bytes(payload, filepath)

    @classmethod
    def from_bytes(cls, payload: bytes, filepath: str | Path | None = None) -> Checkpoint:
        if payload[: len(MAGIC)] != MAGIC:
            raise DataFormatError("Not a Jumper checkpoint", filepath)
        offset = len(MAGIC)
        try:
            (manifest_length,) = _LENGTH.unpack_from(payload, offset)
        except struct.error:
            raise DataFormatError("Truncated checkpoint header", filepath)
        offset += _LENGTH.size
        try:
            manifest = json.loads(payload[offset : offset + manifest_length].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DataFormatError(f"Corrupt checkpoint manifest ({e})", filepath)
        offset += manifest_length

        if not isinstance(manifest, dict):
            raise DataFormatError("Corrupt checkpoint manifest: not a JSON object", filepath)
        if manifest.get("format_version") != FORMAT_VERSION:
            raise DataFormatError(
                f"Unsupported checkpoint version {manifest.get('format_version')}", filepath
            )

        try:
            config = RunConfig.from_dict(manifest["config"])
            schema = SlotSchema.from_dict(manifest["schema"])
            vocab = Vocabulary(list(manifest["vocab"]))
            params = ParamStore(seed=config.seed, precision=config.model.precision)
            for entry in manifest["parameters"]:
                shape = tuple(entry["shape"])
                size = int(np.prod(shape)) * STORED_DTYPE.itemsize
                if offset + size > len(payload):
                    raise DataFormatError(f"Truncated buffer for '{entry['name']}'", filepath)
                values = np.frombuffer(payload, dtype=STORED_DTYPE, count=size // 4, offset=offset)
                params.add(entry["name"], shape, init="zeros").values[...] = values.reshape(shape)
                offset += size
        except KeyError as e:
            raise DataFormatError(f"Corrupt checkpoint manifest: missing {e}", filepath)
        except TypeError as e:
            raise DataFormatError(f"Corrupt checkpoint manifest ({e})", filepath)
        if offset != len(payload):
            raise DataFormatError(f"{len(payload) - offset} trailing bytes", filepath)

        return cls(
            config=config,
            schema=schema,
            vocab=vocab,
            params=params,
            decoding=manifest.get("decoding", "jumper"),
        )
