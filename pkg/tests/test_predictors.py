"""Baseline predictors and the prediction file format."""

from __future__ import annotations

import json

import pytest

from retyper.corpus import (
    FLAG_DISAPPEAR,
    FLAG_RECOVERED,
    CorpusSplit,
    LabeledExample,
)
from retyper.errors import ValidationError
from retyper.ingest import parse_export_record
from retyper.predictors import (
    Prediction,
    SizeTable,
    fit_size_table,
    predict_identity,
    predict_most_frequent,
    predict_size_conditioned,
    read_predictions,
    write_predictions,
)
from retyper.typelib import (
    DISAPPEAR,
    DISAPPEAR_TEXT,
    Pointer,
    Primitive,
    build_type_lexicon,
    render_type,
)

INT = Primitive("int", 4)
UINT = Primitive("unsigned int", 4)
CHAR = Primitive("char", 1)
LONG = Primitive("long int", 8)

_T = {
    "int": {"kind": "primitive", "name": "int", "size": 4},
    "uint": {"kind": "primitive", "name": "unsigned int", "size": 4},
    "long": {"kind": "primitive", "name": "long int", "size": 8},
}


def _example(entry, variables, gold, flags=None):
    """variables: [(name, size, decomp_type_key)]; gold: {name: TypeDesc}."""
    code = "{ " + " ".join(f"{n};" for n, _s, _t in variables) + " }"
    fr = parse_export_record(
        json.dumps(
            {
                "schema": 1,
                "binary": "e" * 64,
                "function": f"f{entry}",
                "entry": entry,
                "view": "debug",
                "status": "ok",
                "code": code,
                "variables": [
                    {
                        "name": n,
                        "storage": {"kind": "stack", "value": -8 * (i + 1), "size": s},
                        "type": _T[t],
                    }
                    for i, (n, s, t) in enumerate(variables)
                ],
            }
        )
    )
    if flags is None:
        flags = {
            n: (
                FLAG_DISAPPEAR
                if render_type(t) == DISAPPEAR_TEXT
                else FLAG_RECOVERED
            )
            for n, t in gold.items()
        }
    return LabeledExample(fr, gold, flags)


def test_identity_echoes_the_decompiler():
    ex = _example(1, [("a", 4, "int"), ("b", 8, "long")], {"a": INT, "b": LONG})
    pred = predict_identity(ex)
    assert render_type(pred.variables["a"][0]) == "int"
    assert render_type(pred.variables["b"][0]) == "long int"
    assert all(conf == 1.0 for _t, conf in pred.variables.values())


def test_most_frequent_is_constant_rank_one():
    lexicon = build_type_lexicon([LONG, LONG, INT])
    ex = _example(2, [("a", 4, "int"), ("b", 8, "long")], {"a": INT, "b": LONG})
    pred = predict_most_frequent(ex, lexicon)
    assert {render_type(t) for t, _c in pred.variables.values()} == {"long int"}


def test_size_table_learns_the_modal_gold_per_key():
    train = CorpusSplit(
        "train",
        [
            _example(1, [("a", 4, "int")], {"a": UINT}),
            _example(2, [("b", 4, "int")], {"b": UINT}),
            _example(3, [("c", 4, "int")], {"c": INT}),
            _example(4, [("d", 8, "long")], {"d": DISAPPEAR}),
        ],
    )
    table = fit_size_table(train)
    assert render_type(table.table[("int", 4)]) == "unsigned int"
    assert render_type(table.table[("long int", 8)]) == DISAPPEAR_TEXT
    # global mode backs up unseen keys
    assert render_type(table.fallback) == "unsigned int"
    ex = _example(5, [("z", 1, "uint")], {"z": CHAR})
    pred = predict_size_conditioned(ex, table)
    assert render_type(pred.variables["z"][0]) == "unsigned int"


def test_size_table_ties_break_toward_smaller_render():
    train = CorpusSplit(
        "train",
        [
            _example(1, [("a", 4, "int")], {"a": UINT}),
            _example(2, [("b", 4, "int")], {"b": INT}),
        ],
    )
    table = fit_size_table(train)
    # "int" < "unsigned int" lexicographically
    assert render_type(table.table[("int", 4)]) == "int"
    reversed_train = CorpusSplit("train", list(reversed(train.examples)))
    again = fit_size_table(reversed_train)
    assert again.to_obj() == table.to_obj()


def test_size_table_refuses_an_empty_split():
    with pytest.raises(ValidationError):
        fit_size_table(CorpusSplit("train", []))


def test_size_table_round_trip():
    train = CorpusSplit(
        "train",
        [
            _example(1, [("a", 4, "int"), ("p", 8, "long")], {"a": INT, "p": Pointer(CHAR)}),
        ],
    )
    table = fit_size_table(train)
    back = SizeTable.from_obj(table.to_obj())
    assert back.to_obj() == table.to_obj()
    assert ("long int", 8) in back.table


def test_confidence_outside_unit_interval_rejected():
    with pytest.raises(ValueError):
        Prediction("a" * 64, "f@0x1", "identity", {"x": (INT, 1.5)})


def test_prediction_files_round_trip(tmp_path):
    ex1 = _example(1, [("a", 4, "int"), ("b", 8, "long")], {"a": INT, "b": LONG})
    ex2 = _example(2, [("c", 4, "uint")], {"c": UINT})
    preds = [predict_identity(ex1), predict_identity(ex2)]
    path = tmp_path / "preds.jsonl"
    assert write_predictions(path, preds) == 3  # one line per variable
    back = list(read_predictions(path))
    assert len(back) == 2
    assert back[0].function_id == "f1@0x1"
    assert {n: render_type(t) for n, (t, _c) in back[0].variables.items()} == {
        "a": "int",
        "b": "long int",
    }
    assert back[1].predictor == "identity"


def test_duplicate_prediction_lines_rejected(tmp_path):
    ex = _example(1, [("a", 4, "int")], {"a": INT})
    path = tmp_path / "preds.jsonl"
    write_predictions(path, [predict_identity(ex)])
    line = path.read_text()
    path.write_text(line + line)
    with pytest.raises(ValidationError) as err:
        list(read_predictions(path))
    assert ":2" in str(err.value)


def test_most_frequent_scores_zero_on_recovered_fixture_variables(corpus_debug):
    # the fixture corpus makes disappear the dominant gold label, so the
    # frequency baseline never predicts a real type
    lexicon = build_type_lexicon(
        t for ex in corpus_debug.train.examples for t in ex.gold_types.values()
    )
    for ex in corpus_debug.test.examples:
        pred = predict_most_frequent(ex, lexicon)
        for name, (t, _c) in pred.variables.items():
            hit = render_type(t) == render_type(ex.gold_types[name])
            assert hit == (ex.flags[name] == FLAG_DISAPPEAR)
