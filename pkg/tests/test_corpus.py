"""Labeling, alignment, filtering, splitting, and leak marking."""

from __future__ import annotations

import json
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retyper.corpus import (
    FLAG_DISAPPEAR,
    FLAG_RECOVERED,
    CorpusSplit,
    LabeledExample,
    align_variables,
    build_labeled_examples,
    check_leak_freedom,
    compute_stats,
    filter_function,
    label_disappear,
    load_corpus,
    mark_in_train,
    save_corpus,
    split_corpus,
)
from retyper.errors import (
    AmbiguousAlignmentError,
    EmptyCorpusError,
    ValidationError,
    WiringError,
)
from retyper.ingest import parse_export_record, serialize_record
from retyper.typelib import DISAPPEAR, Primitive, render_type


def _find(records, name):
    for fr in records:
        if fr.name == name:
            return fr
    raise AssertionError(f"record {name} not found")


def _by_entry(records, entry):
    for fr in records:
        if fr.entry == entry:
            return fr
    raise AssertionError(f"record @{entry:#x} not found")


# -- the disappear rule ------------------------------------------------------


def test_labels_partition_into_declared_and_invented(
    fixture_corpus, fixture_records, fixture_indices
):
    for prog, pdata in fixture_corpus.manifest["programs"].items():
        index = fixture_indices[prog]
        for fr in fixture_records[prog]["debug"]:
            if fr.decompile_status != "ok":
                continue
            finfo = pdata["functions"][fr.name]
            labels = label_disappear(fr, index)
            expected_known = set(finfo["declared"]) | set(finfo["globals_as_vars"])
            for name, (flag, ty) in labels.items():
                if name in expected_known:
                    assert flag == FLAG_RECOVERED, f"{prog}/{fr.name}/{name}"
                    assert render_type(ty) != "<disappear>"
                else:
                    assert name in finfo["invented"], f"{prog}/{fr.name}/{name}"
                    assert flag == FLAG_DISAPPEAR
                    assert render_type(ty) == "<disappear>"


def test_global_name_recovers_through_fallback(fixture_records, fixture_indices):
    fr = _find(fixture_records["p06"]["debug"], "alias_mix")
    labels = label_disappear(fr, fixture_indices["p06"])
    flag, ty = labels["g_seed"]
    assert flag == FLAG_RECOVERED
    assert render_type(ty) == "unsigned int"
    # while the invented stack piece disappears
    assert labels["iStack_28"][0] == FLAG_DISAPPEAR


def test_label_disappear_rejects_stripped_view(fixture_records, fixture_indices):
    fr = fixture_records["p01"]["stripped"][0]
    with pytest.raises(WiringError):
        label_disappear(fr, fixture_indices["p01"])


def test_label_disappear_rejects_foreign_index(fixture_records, fixture_indices):
    fr = _find(fixture_records["p01"]["debug"], "block_crc")
    with pytest.raises(WiringError):
        label_disappear(fr, fixture_indices["p02"])


# -- storage alignment -------------------------------------------------------


def test_alignment_maps_stripped_names_onto_debug_names(
    fixture_corpus, fixture_records
):
    info = fixture_corpus.fn_info("p06", "alias_mix")
    debug = _find(fixture_records["p06"]["debug"], "alias_mix")
    stripped = _by_entry(fixture_records["p06"]["stripped"], info["entry"])
    mapping = align_variables(stripped, debug)
    renames = info["stripped_names"]  # debug -> stripped
    for debug_name, stripped_name in renames.items():
        assert mapping[stripped_name] == debug_name
    # the stripped-only temporaries match nothing: synthetic disappear
    unmatched = [s for s, d in mapping.items() if d is None]
    assert len(unmatched) == info["stripped_extras"]


def test_alignment_is_order_independent(fixture_corpus, fixture_records):
    info = fixture_corpus.fn_info("p06", "alias_mix")
    debug = _find(fixture_records["p06"]["debug"], "alias_mix")
    stripped = _by_entry(fixture_records["p06"]["stripped"], info["entry"])
    baseline = align_variables(stripped, debug)
    rng = random.Random(7)
    for _ in range(5):
        obj = json.loads(serialize_record(stripped))
        rng.shuffle(obj["variables"])
        shuffled = parse_export_record(json.dumps(obj))
        assert align_variables(shuffled, debug) == baseline


def test_duplicate_storage_keys_are_ambiguous(fixture_corpus, fixture_records):
    info = fixture_corpus.fn_info("p18", "twin_stack")
    debug = _find(fixture_records["p18"]["debug"], "twin_stack")
    stripped = _by_entry(fixture_records["p18"]["stripped"], info["entry"])
    with pytest.raises(AmbiguousAlignmentError):
        align_variables(stripped, debug)


def test_alignment_requires_same_function(fixture_records):
    debug = _find(fixture_records["p01"]["debug"], "block_crc")
    other = fixture_records["p02"]["stripped"][0]
    with pytest.raises(WiringError):
        align_variables(other, debug)


# -- filtering ---------------------------------------------------------------


def _example_for(fr, index):
    labels = label_disappear(fr, index)
    return LabeledExample(
        fr,
        {n: t for n, (_f, t) in labels.items()},
        {n: f for n, (f, _t) in labels.items()},
    )


def test_filter_reasons_on_the_recorded_specials(fixture_records, fixture_indices):
    idx = fixture_indices["p19"]
    records = fixture_records["p19"]["debug"]
    assert filter_function(_example_for(_find(records, "big_search"), idx)) == "timeout"
    assert filter_function(_example_for(_find(records, "broken_parse"), idx)) == "unclean"
    idx20 = fixture_indices["p20"]
    records20 = fixture_records["p20"]["debug"]
    # decompiled fine but the body is empty: still unclean
    assert filter_function(_example_for(_find(records20, "thunk_exit"), idx20)) == "unclean"
    # decompiled fine but references no variables: no training signal
    assert (
        filter_function(_example_for(_find(records20, "counter_bump"), idx20))
        == "no-variables"
    )
    assert filter_function(_example_for(_find(records20, "gap_pick_20"), idx20)) is None


# -- corpus assembly ---------------------------------------------------------


def test_debug_direct_build_keeps_and_rejects_exactly(debug_records, indices_by_id):
    examples, rejections = build_labeled_examples(
        debug_records, indices_by_id, mode="debug-direct"
    )
    assert len(examples) == 62
    assert dict(rejections) == {"timeout": 1, "unclean": 2, "no-variables": 1}
    assert {ex.record.view for ex in examples} == {"debug"}


def test_aligned_build_drops_the_ambiguous_function(
    debug_records, stripped_records, indices_by_id
):
    examples, rejections = build_labeled_examples(
        debug_records + stripped_records, indices_by_id, mode="aligned"
    )
    assert len(examples) == 61
    assert dict(rejections) == {
        "timeout": 1,
        "unclean": 2,
        "no-variables": 1,
        "ambiguous-alignment": 1,
    }
    # every aligned example is a stripped-view record
    assert {ex.record.view for ex in examples} == {"stripped"}


def test_aligned_examples_carry_synthetic_disappear(
    fixture_corpus, debug_records, stripped_records, indices_by_id
):
    examples, _ = build_labeled_examples(
        debug_records + stripped_records, indices_by_id, mode="aligned"
    )
    info = fixture_corpus.fn_info("p06", "alias_mix")
    ex = next(
        e
        for e in examples
        if e.record.entry == info["entry"]
        and e.record.binary_id == fixture_corpus.program("p06")["binary_id"]
    )
    renamed = set(info["stripped_names"].values())
    synthetic = set(ex.flags) - renamed
    assert len(synthetic) == info["stripped_extras"]
    assert all(ex.flags[n] == FLAG_DISAPPEAR for n in synthetic)


def test_unindexed_binary_is_counted_not_crashed(debug_records):
    examples, rejections = build_labeled_examples(
        debug_records[:4], {}, mode="debug-direct"
    )
    assert examples == []
    assert rejections["no-index"] == 4


def test_stripped_record_without_debug_twin_is_unpaired(
    fixture_corpus, stripped_records, indices_by_id
):
    some = [
        fr
        for fr in stripped_records
        if fr.binary_id == fixture_corpus.program("p01")["binary_id"]
    ]
    examples, rejections = build_labeled_examples(some, indices_by_id, mode="aligned")
    assert examples == []
    assert rejections["unpaired"] == len(some)


def test_unknown_mode_rejected(debug_records, indices_by_id):
    with pytest.raises(ValidationError):
        build_labeled_examples(debug_records, indices_by_id, mode="direct")


def test_duplicate_records_are_deduplicated_first_wins(debug_records, indices_by_id):
    once, _ = build_labeled_examples(debug_records, indices_by_id)
    twice, _ = build_labeled_examples(debug_records + debug_records, indices_by_id)
    assert len(twice) == len(once)
    assert [ex.record.function_id for ex in twice] == [
        ex.record.function_id for ex in once
    ]


def test_example_coverage_invariant_is_enforced():
    fr = parse_export_record(
        json.dumps(
            {
                "schema": 1,
                "binary": "c" * 64,
                "function": "f",
                "entry": 1,
                "view": "debug",
                "status": "ok",
                "code": "int f(int a)\n{\n  return a;\n}\n",
                "variables": [
                    {
                        "name": "a",
                        "storage": {"kind": "register", "value": 0, "size": 4},
                        "type": {"kind": "primitive", "name": "int", "size": 4},
                    }
                ],
            }
        )
    )
    with pytest.raises(ValueError):
        LabeledExample(fr, {}, {})
    with pytest.raises(ValueError):
        # flag contradicts the gold type
        LabeledExample(fr, {"a": DISAPPEAR}, {"a": FLAG_RECOVERED})
    ok = LabeledExample(fr, {"a": Primitive("int", 4)}, {"a": FLAG_RECOVERED})
    assert ok.fingerprint


# -- splitting ---------------------------------------------------------------


def test_split_keeps_whole_binaries_together(corpus_debug):
    for split in (corpus_debug.train, corpus_debug.valid, corpus_debug.test):
        assert split.examples, f"{split.name} should not be empty"
    check_leak_freedom(corpus_debug.train, corpus_debug.valid, corpus_debug.test)


def test_split_is_reproducible_and_seed_sensitive(corpus_debug):
    examples = corpus_debug.examples
    a = split_corpus(examples, seed=0)
    b = split_corpus(examples, seed=0)
    for x, y in zip(a, b):
        assert [e.record.function_id for e in x.examples] == [
            e.record.function_id for e in y.examples
        ]
    assert any(
        x.binary_ids != z.binary_ids
        for seed in range(1, 6)
        for x, z in zip(a, split_corpus(examples, seed=seed))
    ), "changing the seed should move some binary between splits"


def test_split_ratio_validation():
    with pytest.raises(ValidationError):
        split_corpus([], ratios=(0.5, 0.5, 0.5))
    with pytest.raises(ValidationError):
        split_corpus([], ratios=(1.0, 0.0, 0.0))
    with pytest.raises(EmptyCorpusError):
        split_corpus([], ratios=(0.8, 0.1, 0.1))


def test_split_fractions_approach_ratios(corpus_debug):
    # spread over many one-example binaries the empirical shares land within
    # five points of the requested ratios
    obj = corpus_debug.examples[0].to_obj()
    examples = []
    for i in range(400):
        o = json.loads(json.dumps(obj))
        o["record"]["binary"] = f"{i:064x}"
        examples.append(LabeledExample.from_obj(o))
    train, valid, test = split_corpus(examples, ratios=(0.8, 0.1, 0.1), seed=3)
    total = len(examples)
    assert abs(len(train.examples) / total - 0.8) < 0.05
    assert abs(len(valid.examples) / total - 0.1) < 0.05
    assert abs(len(test.examples) / total - 0.1) < 0.05


@given(st.integers(min_value=0, max_value=2**31))
@settings(max_examples=25, deadline=None)
def test_split_assignment_depends_only_on_binary_and_seed(seed):
    from retyper.corpus import _split_fraction

    u = _split_fraction("a" * 64, seed)
    assert 0.0 <= u < 1.0
    assert u == _split_fraction("a" * 64, seed)


# -- in-train marking --------------------------------------------------------


def test_mark_in_train_flags_only_shared_bodies(corpus_debug):
    train_fps = {ex.fingerprint for ex in corpus_debug.train.examples}
    for ex in corpus_debug.test.examples:
        assert ex.in_train == (ex.fingerprint in train_fps)


def test_mark_in_train_rejects_binary_leaks(corpus_debug):
    train = corpus_debug.train
    fake_test = CorpusSplit("test", list(train.examples[:1]))
    with pytest.raises(WiringError):
        mark_in_train(fake_test, train)


def test_only_the_marked_split_carries_flags(corpus_debug):
    assert all(ex.in_train is None for ex in corpus_debug.train.examples)
    assert all(ex.in_train is None for ex in corpus_debug.valid.examples)
    assert all(ex.in_train is not None for ex in corpus_debug.test.examples)


# -- statistics --------------------------------------------------------------


def test_stats_zero_variable_function_counts_as_no_disappear():
    fr = parse_export_record(
        json.dumps(
            {
                "schema": 1,
                "binary": "d" * 64,
                "function": "f",
                "entry": 2,
                "view": "debug",
                "status": "ok",
                "code": "void f(void)\n{\n  return;\n}\n",
                "variables": [],
            }
        )
    )
    stats = compute_stats(CorpusSplit("train", [LabeledExample(fr, {}, {})]))
    assert stats.functions == 1
    assert stats.variables == 0
    assert stats.pct_no_disappear == 100.0
    assert stats.pct_all_disappear == 0.0
    assert stats.pct_structs is None  # no variables to take a share of
    assert stats.pct_in_train is None  # unmarked split


# -- persistence -------------------------------------------------------------


def test_save_load_round_trip(tmp_path, corpus_debug):
    splits = (corpus_debug.train, corpus_debug.valid, corpus_debug.test)
    save_corpus(
        tmp_path,
        splits,
        seed=0,
        ratios=(0.8, 0.1, 0.1),
        mode="debug-direct",
        rejections=Counter(corpus_debug.rejections),
    )
    loaded = load_corpus(tmp_path)
    for before, after in zip(splits, loaded):
        assert len(after.examples) == len(before.examples)
        assert {e.record.function_id for e in after.examples} == {
            e.record.function_id for e in before.examples
        }
        by_id = {e.record.function_id: e for e in before.examples}
        for e in after.examples:
            orig = by_id[e.record.function_id]
            assert e.fingerprint == orig.fingerprint
            assert e.in_train == orig.in_train
            assert e.flags == orig.flags
            assert {n: render_type(t) for n, t in e.gold_types.items()} == {
                n: render_type(t) for n, t in orig.gold_types.items()
            }


def test_corpus_manifest_is_byte_deterministic(tmp_path, corpus_debug):
    splits = (corpus_debug.train, corpus_debug.valid, corpus_debug.test)
    a = tmp_path / "a"
    b = tmp_path / "b"
    manifests = []
    for d in (a, b):
        manifests.append(
            save_corpus(
                d,
                splits,
                seed=0,
                ratios=(0.8, 0.1, 0.1),
                mode="debug-direct",
                rejections=Counter(corpus_debug.rejections),
            )
        )
    assert manifests[0] == manifests[1]
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    for name in ("train", "valid", "test"):
        assert (a / f"{name}.jsonl").read_bytes() == (b / f"{name}.jsonl").read_bytes()
    # the recorded counts describe the splits
    counts = manifests[0]["counts"]
    assert counts["train"]["examples"] == len(corpus_debug.train.examples)
    assert counts["test"]["binaries"] == len(corpus_debug.test.binary_ids)
