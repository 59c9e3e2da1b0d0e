"""Run manifests: what ran, on which inputs, with which knobs.

The manifest hash covers inputs, configuration, seed, and tool version — not
the timestamp — so a rerun on unchanged inputs produces the same hash and
byte-identical downstream artifacts. The timestamp is recorded for humans and
honors SOURCE_DATE_EPOCH for reproducible builds.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__


def manifest_timestamp() -> int:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        return int(epoch)
    return int(time.time())


def hash_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def hash_obj(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    inputs: dict[str, str]  # label -> sha256
    seed: int
    config: dict
    tool_version: str = __version__
    timestamp: int = field(default_factory=manifest_timestamp)

    def content(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "inputs": dict(sorted(self.inputs.items())),
            "seed": self.seed,
            "config": self.config,
            "tool_version": self.tool_version,
        }

    def hash(self) -> str:
        return hash_obj(self.content())

    def to_obj(self) -> dict:
        obj = self.content()
        obj["timestamp"] = self.timestamp
        obj["manifest_hash"] = self.hash()
        return obj

    def write(self, path: Path) -> str:
        Path(path).write_text(
            json.dumps(self.to_obj(), sort_keys=True, indent=1) + "\n"
        )
        return self.hash()
