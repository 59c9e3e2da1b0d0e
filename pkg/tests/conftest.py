"""Session-wide fixtures.

The heavyweight fixture is the compiled corpus: twenty small C programs built
with debug info, their stripped twins, and recorded decompiler exports for
both views.  It is generated once per session into a tmp directory by the
same generator script shipped in scripts/, so tests exercise exactly what a
user would build.
"""

from __future__ import annotations

import importlib.util
import json
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

from retyper.corpus import (
    CorpusSplit,
    build_labeled_examples,
    mark_in_train,
    split_corpus,
)
from retyper.dwarf import DwarfIndex, index_binary
from retyper.ingest import FunctionRecord, read_export_file

REPO = Path(__file__).resolve().parent.parent

_spec = importlib.util.spec_from_file_location(
    "make_fixtures", REPO / "scripts" / "make_fixtures.py"
)
make_fixtures = importlib.util.module_from_spec(_spec)
sys.modules.setdefault("make_fixtures", make_fixtures)
_spec.loader.exec_module(make_fixtures)


def pytest_collection_modifyitems(config, items):
    # keep the slow end-to-end checks at the tail so unit failures surface first
    items.sort(key=lambda it: it.fspath.basename == "test_acceptance.py")


@dataclass
class FixtureCorpus:
    root: Path
    manifest: dict

    @property
    def bin_dir(self) -> Path:
        return self.root / "bin"

    @property
    def stripped_dir(self) -> Path:
        return self.root / "stripped"

    @property
    def export_dir(self) -> Path:
        return self.root / "exports"

    def binary(self, name: str) -> Path:
        return self.bin_dir / name

    def program(self, name: str) -> dict:
        return self.manifest["programs"][name]

    def fn_info(self, prog: str, fn: str) -> dict:
        return self.manifest["programs"][prog]["functions"][fn]


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory) -> FixtureCorpus:
    if shutil.which("gcc") is None:
        pytest.skip("gcc not available; compiled fixtures cannot be built")
    root = tmp_path_factory.mktemp("fixture-corpus")
    manifest = make_fixtures.build(root)
    return FixtureCorpus(root=root, manifest=manifest)


@pytest.fixture(scope="session")
def fixture_indices(fixture_corpus) -> dict[str, DwarfIndex]:
    """Program name -> ground-truth index, straight from the compiled binary."""
    return {
        name: index_binary(fixture_corpus.binary(name))
        for name in fixture_corpus.manifest["programs"]
    }


@pytest.fixture(scope="session")
def indices_by_id(fixture_indices) -> dict[str, DwarfIndex]:
    return {idx.binary_id: idx for idx in fixture_indices.values()}


@pytest.fixture(scope="session")
def fixture_records(fixture_corpus) -> dict[str, dict[str, list[FunctionRecord]]]:
    """Program name -> {"debug": [...], "stripped": [...]} parsed exports."""
    out: dict[str, dict[str, list[FunctionRecord]]] = {}
    for name in fixture_corpus.manifest["programs"]:
        out[name] = {
            view: list(
                read_export_file(fixture_corpus.export_dir / f"{name}.{view}.jsonl")
            )
            for view in ("debug", "stripped")
        }
    return out


def _flatten(records, view):
    return [r for per in records.values() for r in per[view]]


@pytest.fixture(scope="session")
def debug_records(fixture_records) -> list[FunctionRecord]:
    return _flatten(fixture_records, "debug")


@pytest.fixture(scope="session")
def stripped_records(fixture_records) -> list[FunctionRecord]:
    return _flatten(fixture_records, "stripped")


@dataclass
class BuiltCorpus:
    examples: list
    rejections: dict
    train: CorpusSplit
    valid: CorpusSplit
    test: CorpusSplit


def _build(records, indices_by_id, mode, seed=0):
    examples, rejections = build_labeled_examples(
        records, indices_by_id, mode=mode
    )
    train, valid, test = split_corpus(
        examples, seed=seed, ratios=(0.8, 0.1, 0.1)
    )
    test = mark_in_train(test, train)
    return BuiltCorpus(examples, dict(rejections), train, valid, test)


@pytest.fixture(scope="session")
def corpus_debug(debug_records, indices_by_id) -> BuiltCorpus:
    return _build(debug_records, indices_by_id, "debug-direct")


@pytest.fixture(scope="session")
def corpus_aligned(debug_records, stripped_records, indices_by_id) -> BuiltCorpus:
    return _build(debug_records + stripped_records, indices_by_id, "aligned")
