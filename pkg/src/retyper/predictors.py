"""Prediction interface and non-neural baselines.

Every predictor maps a labeled example to one (type, confidence) pair per
variable. The baselines here bound the trained model from below: trusting the
decompiler, always guessing the most frequent type, and a frequency table
conditioned on what the decompiler said plus the variable's size.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .corpus import CorpusSplit, LabeledExample
from .errors import ValidationError
from .typelib import (
    TypeDesc,
    TypeLexicon,
    render_type,
    type_from_obj,
    type_to_obj,
)

IDENTITY = "identity"
MOST_FREQUENT = "most-frequent"
SIZE_CONDITIONED = "size-conditioned"
RETYPER = "retyper"


@dataclass(frozen=True)
class Prediction:
    binary_id: str
    function_id: str
    predictor: str
    variables: dict[str, tuple[TypeDesc, float]]  # name -> (type, confidence)

    def __post_init__(self):
        for name, (_t, conf) in self.variables.items():
            if not 0.0 <= conf <= 1.0:
                raise ValueError(f"{name}: confidence {conf} outside [0, 1]")


def _prediction(
    ex: LabeledExample, predictor: str, typed: dict[str, tuple[TypeDesc, float]]
) -> Prediction:
    return Prediction(
        ex.record.binary_id, ex.record.function_id, predictor, typed
    )


def predict_identity(ex: LabeledExample) -> Prediction:
    """Trust the decompiler: echo decomp_type with full confidence."""
    return _prediction(
        ex,
        IDENTITY,
        {v.decomp_name: (v.decomp_type, 1.0) for v in ex.record.variables},
    )


def predict_most_frequent(ex: LabeledExample, lexicon: TypeLexicon) -> Prediction:
    """Predict the lexicon's rank-1 type for every variable."""
    top = lexicon.type_at(0)
    return _prediction(
        ex,
        MOST_FREQUENT,
        {v.decomp_name: (top, 1.0) for v in ex.record.variables},
    )


@dataclass(frozen=True)
class SizeTable:
    """Modal gold type per (decompiler type text, variable size), train-only."""

    table: dict[tuple[str, int], TypeDesc]
    fallback: TypeDesc  # global mode, for unseen keys

    def to_obj(self) -> dict:
        return {
            "table": {
                f"{size}:{text}": type_to_obj(t)
                for (text, size), t in sorted(self.table.items())
            },
            "fallback": type_to_obj(self.fallback),
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "SizeTable":
        table = {}
        for key, t in obj["table"].items():
            size_text, _, text = key.partition(":")
            table[(text, int(size_text))] = type_from_obj(t)
        return cls(table, type_from_obj(obj["fallback"]))


def fit_size_table(train: CorpusSplit) -> SizeTable:
    """Count gold types per (decomp type, size) key over the train split.

    Ties break toward the lexicographically smallest rendering, so fitting is
    order-independent.
    """
    per_key: dict[tuple[str, int], Counter] = {}
    overall: Counter = Counter()
    reps: dict[str, TypeDesc] = {}
    for ex in train.examples:
        for v in ex.record.variables:
            gold = ex.gold_types[v.decomp_name]
            gold_text = render_type(gold)
            reps.setdefault(gold_text, gold)
            key = (render_type(v.decomp_type), v.size)
            per_key.setdefault(key, Counter())[gold_text] += 1
            overall[gold_text] += 1
    if not overall:
        raise ValidationError("cannot fit a size table from an empty train split")

    def modal(counter: Counter) -> TypeDesc:
        best = min(counter.items(), key=lambda kv: (-kv[1], kv[0]))
        return reps[best[0]]

    return SizeTable(
        {key: modal(counter) for key, counter in per_key.items()},
        modal(overall),
    )


def predict_size_conditioned(ex: LabeledExample, table: SizeTable) -> Prediction:
    typed = {}
    for v in ex.record.variables:
        key = (render_type(v.decomp_type), v.size)
        typed[v.decomp_name] = (table.table.get(key, table.fallback), 1.0)
    return _prediction(ex, SIZE_CONDITIONED, typed)


# -- serialization -----------------------------------------------------------


def write_predictions(path: Path, predictions: Iterable[Prediction]) -> int:
    """One line per variable: {binary, function, variable, type, confidence,
    predictor}. Returns the number of lines written."""
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for p in predictions:
            for name, (t, conf) in sorted(p.variables.items()):
                f.write(
                    json.dumps(
                        {
                            "binary": p.binary_id,
                            "function": p.function_id,
                            "variable": name,
                            "type": type_to_obj(t),
                            "confidence": conf,
                            "predictor": p.predictor,
                        },
                        sort_keys=True,
                        separators=(",", ":"),
                    )
                )
                f.write("\n")
                n += 1
    return n


def read_predictions(path: Path) -> Iterator[Prediction]:
    """Group per-variable lines back into per-function Predictions."""
    grouped: dict[tuple[str, str, str], dict[str, tuple[TypeDesc, float]]] = {}
    order: list[tuple[str, str, str]] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                key = (obj["binary"], obj["function"], obj["predictor"])
                typed = (type_from_obj(obj["type"]), float(obj["confidence"]))
                name = obj["variable"]
            except (KeyError, ValueError) as e:
                raise ValidationError(f"{path}:{lineno}: {e}") from e
            if key not in grouped:
                grouped[key] = {}
                order.append(key)
            if name in grouped[key]:
                raise ValidationError(
                    f"{path}:{lineno}: duplicate prediction for {name!r}"
                )
            grouped[key][name] = typed
    for binary_id, function_id, predictor in order:
        yield Prediction(
            binary_id,
            function_id,
            predictor,
            grouped[(binary_id, function_id, predictor)],
        )
