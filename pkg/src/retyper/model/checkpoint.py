"""Versioned binary checkpoint container.

Layout: magic ``RTYP``, little-endian u32 format version, u64 header length,
canonical-JSON header (config, token vocabulary, type lexicon + its hash, and
an ordered array manifest), then each parameter tensor as raw little-endian
float64 in manifest order. Nothing in the file depends on time or dict order,
so identical models serialize to identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ValidationError
from ..typelib import TypeLexicon
from .config import ModelConfig
from .core import RetyperModel
from .encode import TokenVocab

MAGIC = b"RTYP"
VERSION = 1


def save_checkpoint(
    model: RetyperModel, path: Path, manifest_hash: Optional[str] = None
) -> None:
    names = sorted(model.params)
    header = {
        "version": VERSION,
        "config": model.config.to_obj(),
        "vocab": list(model.vocab.tokens),
        "lexicon": model.lexicon.to_obj(),
        "lexicon_hash": model.lexicon.content_hash(),
        "arrays": [
            {"name": k, "shape": list(model.params[k].shape)} for k in names
        ],
    }
    if manifest_hash is not None:
        header["manifest_hash"] = manifest_hash
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for k in names:
            f.write(np.ascontiguousarray(model.params[k], dtype="<f8").tobytes())


def read_header(path: Path) -> dict:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValidationError(f"{path}: not a checkpoint (magic {magic!r})")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise ValidationError(
                f"{path}: unsupported checkpoint version {version}"
            )
        (hlen,) = struct.unpack("<Q", f.read(8))
        return json.loads(f.read(hlen))


def load_checkpoint(path: Path) -> RetyperModel:
    path = Path(path)
    header = read_header(path)
    offset = 4 + 4 + 8 + len(
        json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    )
    config = ModelConfig.from_obj(header["config"])
    vocab = TokenVocab(tuple(header["vocab"]))
    lexicon = TypeLexicon.from_obj(header["lexicon"])
    if lexicon.content_hash() != header["lexicon_hash"]:
        raise ValidationError(f"{path}: lexicon hash mismatch")
    data = path.read_bytes()[offset:]
    params: dict[str, np.ndarray] = {}
    pos = 0
    for spec_ in header["arrays"]:
        shape = tuple(spec_["shape"])
        n = int(np.prod(shape)) if shape else 1
        nbytes = n * 8
        if pos + nbytes > len(data):
            raise ValidationError(f"{path}: truncated array {spec_['name']!r}")
        arr = np.frombuffer(
            data, dtype="<f8", count=n, offset=pos
        ).reshape(shape)
        params[spec_["name"]] = arr.astype(np.float64, copy=True)
        pos += nbytes
    if pos != len(data):
        raise ValidationError(f"{path}: {len(data) - pos} trailing bytes")
    return RetyperModel(config, vocab, lexicon, params)
