"""Strict-metric scoring and the 12-cell accuracy grid.

A prediction is correct iff its canonical rendering equals the gold type's,
sub-fields included — no partial credit. Accuracies are reported as
{Overall, In-Train, Not-In-Train} × {Overall, Structs, Disappear,
No Disappear}; slice membership is decided by the gold type alone.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Optional

from .corpus import FLAG_DISAPPEAR, CorpusSplit
from .errors import CoverageError, ValidationError
from .predictors import Prediction
from .typelib import Struct, TypeDesc, types_equal

ROW_KEYS = ("overall", "in_train", "not_in_train")
COL_KEYS = ("overall", "structs", "disappear", "no_disappear")
ROW_TITLES = {"overall": "Overall", "in_train": "In-Train", "not_in_train": "Not-In-Train"}
COL_TITLES = {
    "overall": "Overall",
    "structs": "Structs",
    "disappear": "Disappear",
    "no_disappear": "No Disapp",
}
EMPTY_CELL = "—"  # em dash for cells with no population


def score_variable(pred: TypeDesc, gold: TypeDesc) -> bool:
    return types_equal(pred, gold)


@dataclass
class AccuracyReport:
    predictor: str
    mode: str
    manifest_hash: str
    cells: dict[tuple[str, str], list[int]] = field(
        default_factory=lambda: {
            (r, c): [0, 0] for r in ROW_KEYS for c in COL_KEYS
        }
    )

    def add(self, row: str, col: str, correct: bool):
        cell = self.cells[(row, col)]
        cell[0] += int(correct)
        cell[1] += 1

    def correct(self, row: str, col: str) -> int:
        return self.cells[(row, col)][0]

    def total(self, row: str, col: str) -> int:
        return self.cells[(row, col)][1]

    def percentage(self, row: str, col: str) -> Optional[str]:
        """One decimal, halves rounded away from zero; None when empty."""
        correct, total = self.cells[(row, col)]
        if total == 0:
            return None
        pct = Decimal(100 * correct) / Decimal(total)
        return str(pct.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))

    def check_invariants(self):
        for c in COL_KEYS:
            for i in (0, 1):
                if (
                    self.cells[("in_train", c)][i]
                    + self.cells[("not_in_train", c)][i]
                    != self.cells[("overall", c)][i]
                ):
                    raise ValidationError(
                        f"report cell {c!r}: in-train + not-in-train != overall"
                    )
        for r in ROW_KEYS:
            for i in (0, 1):
                if (
                    self.cells[(r, "disappear")][i]
                    + self.cells[(r, "no_disappear")][i]
                    != self.cells[(r, "overall")][i]
                ):
                    raise ValidationError(
                        f"report row {r!r}: disappear + no-disappear != overall"
                    )

    def to_obj(self) -> dict:
        return {
            "predictor": self.predictor,
            "mode": self.mode,
            "manifest_hash": self.manifest_hash,
            "cells": {
                f"{r}/{c}": {"correct": cell[0], "total": cell[1]}
                for (r, c), cell in sorted(self.cells.items())
            },
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "AccuracyReport":
        report = cls(obj["predictor"], obj["mode"], obj["manifest_hash"])
        for key, v in obj["cells"].items():
            r, _, c = key.partition("/")
            if (r, c) not in report.cells:
                raise ValidationError(f"unknown report cell {key!r}")
            report.cells[(r, c)] = [int(v["correct"]), int(v["total"])]
        return report


def aggregate(
    test: CorpusSplit,
    predictions: Iterable[Prediction],
    mode: str = "",
    manifest_hash: str = "",
) -> AccuracyReport:
    """Score one prediction per test variable into the 12-cell grid.

    Every variable lands in the Overall row and exactly one of In-Train /
    Not-In-Train; per row it counts toward Overall plus each slice its gold
    type belongs to. Missing or surplus predictions raise CoverageError.
    """
    by_function: dict[tuple[str, str], Prediction] = {}
    predictor = None
    for p in predictions:
        key = (p.binary_id, p.function_id)
        if key in by_function:
            raise CoverageError(f"duplicate predictions for {p.function_id}")
        by_function[key] = p
        if predictor is None:
            predictor = p.predictor
        elif predictor != p.predictor:
            raise ValidationError(
                f"mixed predictors in one evaluation: {predictor!r} vs "
                f"{p.predictor!r}"
            )

    report = AccuracyReport(predictor or "", mode, manifest_hash)
    missing: list[str] = []
    consumed: set[tuple[str, str, str]] = set()
    for ex in test.examples:
        key = (ex.record.binary_id, ex.record.function_id)
        pred = by_function.get(key)
        if ex.in_train is None:
            raise ValidationError(
                f"{ex.record.function_id}: test example lacks the in_train flag"
            )
        row = "in_train" if ex.in_train else "not_in_train"
        for v in ex.record.variables:
            name = v.decomp_name
            if pred is None or name not in pred.variables:
                missing.append(f"{ex.record.function_id}:{name}")
                continue
            consumed.add((*key, name))
            predicted, _conf = pred.variables[name]
            gold = ex.gold_types[name]
            ok = score_variable(predicted, gold)
            cols = ["overall"]
            if isinstance(gold, Struct):
                cols.append("structs")
            cols.append(
                "disappear"
                if ex.flags[name] == FLAG_DISAPPEAR
                else "no_disappear"
            )
            for r in ("overall", row):
                for c in cols:
                    report.add(r, c, ok)
    extra = [
        f"{fid}:{name}"
        for (b, fid), p in sorted(by_function.items())
        for name in sorted(p.variables)
        if (b, fid, name) not in consumed
    ]
    if missing or extra:
        parts = []
        if missing:
            parts.append("missing predictions: " + ", ".join(missing[:10]))
        if extra:
            parts.append("extra predictions: " + ", ".join(extra[:10]))
        raise CoverageError("; ".join(parts))
    report.check_invariants()
    return report


# -- rendering ---------------------------------------------------------------

_CELL_W = 14


def render_report(report: AccuracyReport) -> str:
    """Fixed-width grid in the published table's column order."""
    group_w = _CELL_W * len(COL_KEYS)
    lines = [
        f"predictor: {report.predictor}    mode: {report.mode or '-'}    "
        f"manifest: {report.manifest_hash or '-'}",
        "".join(ROW_TITLES[r].center(group_w + 3) for r in ROW_KEYS).rstrip(),
    ]
    sub = ""
    for _ in ROW_KEYS:
        sub += "".join(COL_TITLES[c].rjust(_CELL_W) for c in COL_KEYS) + " | "
    lines.append(sub[:-3])
    vals = ""
    for r in ROW_KEYS:
        for c in COL_KEYS:
            pct = report.percentage(r, c)
            vals += (EMPTY_CELL if pct is None else pct).rjust(_CELL_W)
        vals += " | "
    lines.append(vals[:-3])
    counts = ""
    for r in ROW_KEYS:
        for c in COL_KEYS:
            correct, total = report.cells[(r, c)]
            counts += f"{correct}/{total}".rjust(_CELL_W)
        counts += " | "
    lines.append(counts[:-3])
    return "\n".join(lines) + "\n"


def render_csv(report: AccuracyReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["predictor", "row", "slice", "correct", "total", "pct"])
    for r in ROW_KEYS:
        for c in COL_KEYS:
            correct, total = report.cells[(r, c)]
            w.writerow(
                [
                    report.predictor,
                    r,
                    c,
                    correct,
                    total,
                    report.percentage(r, c) or "",
                ]
            )
    return buf.getvalue()


def parse_csv(text: str) -> dict[tuple[str, str], tuple[int, int]]:
    """Counts back out of the CSV (round-trip check)."""
    out = {}
    rows = list(csv.reader(io.StringIO(text)))
    for row in rows[1:]:
        if not row:
            continue
        _pred, r, c, correct, total, _pct = row
        out[(r, c)] = (int(correct), int(total))
    return out


def save_report(report: AccuracyReport, prefix) -> list:
    """Write .txt, .csv, and .json artifacts; returns the paths."""
    from pathlib import Path

    prefix = Path(prefix)
    txt = prefix.with_suffix(".txt")
    csv_path = prefix.with_suffix(".csv")
    js = prefix.with_suffix(".json")
    txt.write_text(render_report(report))
    csv_path.write_text(render_csv(report))
    js.write_text(json.dumps(report.to_obj(), sort_keys=True, indent=1) + "\n")
    return [txt, csv_path, js]
