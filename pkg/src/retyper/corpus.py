"""Labeled corpus construction.

Joins decompiler exports with DWARF ground truth, applies the disappear rule
(a decompiler variable whose name matches nothing the debug info declares gets
the disappear type as its label), filters unusable functions, splits
per-binary, marks test functions whose bodies also occur in training, and
computes corpus statistics.

Two labeling modes are supported, because it is unclear whether the original
pipeline trained on the debug view directly or aligned stripped variables onto
debug variables by storage:

- ``debug-direct``: examples are debug-view functions labeled by name lookup.
- ``aligned``: examples are stripped-view functions; each variable is matched
  to its debug-view counterpart by exact storage, then labeled through it.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from .dwarf.index import DwarfIndex
from .errors import (
    AmbiguousAlignmentError,
    EmptyCorpusError,
    ValidationError,
    WiringError,
)
from .ingest import (
    FunctionRecord,
    body_fingerprint,
    parse_export_record,
    serialize_record,
)
from .typelib import (
    DISAPPEAR,
    DISAPPEAR_TEXT,
    Struct,
    TypeDesc,
    render_type,
    type_from_obj,
    type_to_obj,
)

log = logging.getLogger(__name__)

MODES = ("debug-direct", "aligned")
FLAG_RECOVERED = "recovered"
FLAG_DISAPPEAR = "disappear"
CORPUS_SCHEMA = 1


@dataclass(frozen=True)
class LabeledExample:
    record: FunctionRecord
    gold_types: dict[str, TypeDesc]
    flags: dict[str, str]  # decomp_name -> recovered | disappear
    in_train: Optional[bool] = None  # set on the test split only

    def __post_init__(self):
        names = {v.decomp_name for v in self.record.variables}
        if set(self.gold_types) != names or set(self.flags) != names:
            raise ValueError("gold types/flags must cover exactly the variables")
        for name, flag in self.flags.items():
            is_dis = render_type(self.gold_types[name]) == DISAPPEAR_TEXT
            if (flag == FLAG_DISAPPEAR) != is_dis:
                raise ValueError(f"{name}: flag {flag!r} contradicts gold type")

    @property
    def fingerprint(self) -> str:
        return body_fingerprint(self.record.tokens)

    def to_obj(self) -> dict:
        obj = {
            "record": json.loads(serialize_record(self.record)),
            "gold": {
                n: type_to_obj(t) for n, t in sorted(self.gold_types.items())
            },
            "flags": dict(sorted(self.flags.items())),
        }
        if self.in_train is not None:
            obj["in_train"] = self.in_train
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "LabeledExample":
        record = parse_export_record(json.dumps(obj["record"]))
        gold = {n: type_from_obj(t) for n, t in obj["gold"].items()}
        return cls(record, gold, dict(obj["flags"]), obj.get("in_train"))


@dataclass
class CorpusSplit:
    name: str  # train | valid | test
    examples: list[LabeledExample] = field(default_factory=list)

    @property
    def binary_ids(self) -> set[str]:
        return {ex.record.binary_id for ex in self.examples}


@dataclass(frozen=True)
class CorpusStats:
    binaries: int
    variables: int
    pct_structs: Optional[float]
    pct_disappear: Optional[float]
    unique_functions: int
    functions: int
    pct_all_disappear: Optional[float]
    pct_no_disappear: Optional[float]
    pct_in_train: Optional[float]


# -- labeling ----------------------------------------------------------------


def label_disappear(
    debug_view: FunctionRecord, index: DwarfIndex
) -> dict[str, tuple[str, TypeDesc]]:
    """Label each debug-view variable by DWARF name lookup.

    A name the debug info declares (in the function, or as a global) keeps its
    DWARF type; any other variable was invented by the decompiler and is
    labeled disappear.
    """
    if debug_view.view != "debug":
        raise WiringError(
            f"{debug_view.function_id}: labeling needs the debug view, "
            f"got {debug_view.view!r}"
        )
    if index.binary_id != debug_view.binary_id:
        raise WiringError(
            f"{debug_view.function_id}: DWARF index is for binary "
            f"{index.binary_id[:12]}…, record is from {debug_view.binary_id[:12]}…"
        )
    out: dict[str, tuple[str, TypeDesc]] = {}
    for v in debug_view.variables:
        t = index.lookup(debug_view.function_id, v.decomp_name)
        if t is not None:
            out[v.decomp_name] = (FLAG_RECOVERED, t)
        else:
            out[v.decomp_name] = (FLAG_DISAPPEAR, DISAPPEAR)
    return out


def align_variables(
    stripped: FunctionRecord, debug: FunctionRecord
) -> dict[str, Optional[str]]:
    """Match stripped-view variables to debug-view ones by exact storage.

    Returns stripped name -> debug name, or None where no debug variable
    occupies the same (kind, value, size) — a synthetic disappear target.
    Duplicate storage keys on either side make the match ambiguous.
    """
    if (
        stripped.binary_id != debug.binary_id
        or stripped.entry != debug.entry
    ):
        raise WiringError(
            f"cannot align {stripped.function_id} against {debug.function_id}: "
            "different binary or entry"
        )
    debug_by_key: dict[tuple, str] = {}
    for v in debug.variables:
        key = v.storage.key()
        if key in debug_by_key:
            raise AmbiguousAlignmentError(
                f"{debug.function_id}: duplicate debug storage {key}"
            )
        debug_by_key[key] = v.decomp_name
    out: dict[str, Optional[str]] = {}
    seen_keys = set()
    for v in stripped.variables:
        key = v.storage.key()
        if key in seen_keys:
            raise AmbiguousAlignmentError(
                f"{stripped.function_id}: duplicate stripped storage {key}"
            )
        seen_keys.add(key)
        out[v.decomp_name] = debug_by_key.get(key)
    return out


def filter_function(ex: LabeledExample) -> Optional[str]:
    """Rejection reason for an example, or None to keep it.

    Timeouts are honored from the export status (the time limit itself is
    enforced by the exporter); failed or empty decompilations are unclean;
    functions referencing no variables carry no training signal.
    """
    status = ex.record.decompile_status
    if status == "timeout":
        return "timeout"
    if status != "ok" or not ex.record.tokens:
        return "unclean"
    if ex.record.placeholder_count() == 0:
        return "no-variables"
    return None


def build_labeled_examples(
    records: Iterable[FunctionRecord],
    indices: dict[str, DwarfIndex],
    mode: str = "debug-direct",
) -> tuple[list[LabeledExample], Counter]:
    """Pair views, label, and filter a stream of export records.

    Returns the kept examples plus a rejection tally. Reasons beyond the
    per-function filter: ``no-index`` (binary never indexed), ``unpaired``
    (aligned mode, stripped function with no debug twin), and
    ``ambiguous-alignment`` (duplicate storage keys).
    """
    if mode not in MODES:
        raise ValidationError(f"unknown labeling mode {mode!r}")
    debug: dict[tuple[str, int], FunctionRecord] = {}
    stripped: dict[tuple[str, int], FunctionRecord] = {}
    for fr in records:
        table = debug if fr.view == "debug" else stripped
        table.setdefault((fr.binary_id, fr.entry), fr)

    examples: list[LabeledExample] = []
    rejections: Counter = Counter()

    def admit(ex: LabeledExample):
        reason = filter_function(ex)
        if reason is None:
            examples.append(ex)
        else:
            rejections[reason] += 1

    if mode == "debug-direct":
        for (binary_id, _entry), fr in sorted(debug.items()):
            index = indices.get(binary_id)
            if index is None:
                rejections["no-index"] += 1
                continue
            labels = label_disappear(fr, index)
            gold = {n: t for n, (_f, t) in labels.items()}
            flags = {n: f for n, (f, _t) in labels.items()}
            admit(LabeledExample(fr, gold, flags))
        return examples, rejections

    for (binary_id, entry), fr in sorted(stripped.items()):
        index = indices.get(binary_id)
        if index is None:
            rejections["no-index"] += 1
            continue
        partner = debug.get((binary_id, entry))
        if partner is None:
            rejections["unpaired"] += 1
            continue
        try:
            mapping = align_variables(fr, partner)
        except AmbiguousAlignmentError as e:
            log.warning("dropping function: %s", e)
            rejections["ambiguous-alignment"] += 1
            continue
        labels = label_disappear(partner, index)
        gold: dict[str, TypeDesc] = {}
        flags: dict[str, str] = {}
        for v in fr.variables:
            debug_name = mapping[v.decomp_name]
            if debug_name is None:
                gold[v.decomp_name] = DISAPPEAR
                flags[v.decomp_name] = FLAG_DISAPPEAR
            else:
                flag, t = labels[debug_name]
                gold[v.decomp_name] = t
                flags[v.decomp_name] = flag
        admit(LabeledExample(fr, gold, flags))
    return examples, rejections


# -- splitting ---------------------------------------------------------------


def _split_fraction(binary_id: str, seed: int) -> float:
    h = hashlib.blake2b(
        f"{seed}:{binary_id}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(h, "little") / 2**64


def split_corpus(
    examples: Iterable[LabeledExample],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[CorpusSplit, CorpusSplit, CorpusSplit]:
    """Assign whole binaries to train/valid/test by seeded hash."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValidationError(f"ratios must be three positive numbers: {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"ratios must sum to 1: {ratios}")
    train = CorpusSplit("train")
    valid = CorpusSplit("valid")
    test = CorpusSplit("test")
    empty = True
    for ex in examples:
        empty = False
        u = _split_fraction(ex.record.binary_id, seed)
        if u < ratios[0]:
            train.examples.append(ex)
        elif u < ratios[0] + ratios[1]:
            valid.examples.append(ex)
        else:
            test.examples.append(ex)
    if empty:
        raise EmptyCorpusError("no examples to split")
    check_leak_freedom(train, valid, test)
    return train, valid, test


def check_leak_freedom(*splits: CorpusSplit):
    for i, a in enumerate(splits):
        for b in splits[i + 1 :]:
            shared = a.binary_ids & b.binary_ids
            if shared:
                raise WiringError(
                    f"splits {a.name}/{b.name} share binaries: "
                    + ", ".join(s[:12] for s in sorted(shared))
                )


def mark_in_train(test: CorpusSplit, train: CorpusSplit) -> CorpusSplit:
    """Flag test functions whose normalized body also occurs in training."""
    check_leak_freedom(test, train)
    train_fps = {ex.fingerprint for ex in train.examples}
    marked = [
        replace(ex, in_train=ex.fingerprint in train_fps) for ex in test.examples
    ]
    return CorpusSplit(test.name, marked)


# -- statistics --------------------------------------------------------------


def compute_stats(split: CorpusSplit) -> CorpusStats:
    """Corpus-level counts and percentages.

    A function with no variables counts on the no-disappear side; a function
    with at least one variable is all-disappear, no-disappear, or mixed, so
    the three classes always partition the functions.
    """
    n_vars = 0
    n_structs = 0
    n_disappear = 0
    n_all = 0
    n_none = 0
    fingerprints = set()
    in_train_flags = []
    for ex in split.examples:
        fingerprints.add(ex.fingerprint)
        if ex.in_train is not None:
            in_train_flags.append(ex.in_train)
        dis = 0
        for name, t in ex.gold_types.items():
            n_vars += 1
            if isinstance(t, Struct):
                n_structs += 1
            if ex.flags[name] == FLAG_DISAPPEAR:
                n_disappear += 1
                dis += 1
        total = len(ex.gold_types)
        if dis == 0:
            n_none += 1
        elif dis == total:
            n_all += 1
    n_funcs = len(split.examples)

    def pct(part: int, whole: int) -> Optional[float]:
        return 100.0 * part / whole if whole else None

    return CorpusStats(
        binaries=len(split.binary_ids),
        variables=n_vars,
        pct_structs=pct(n_structs, n_vars),
        pct_disappear=pct(n_disappear, n_vars),
        unique_functions=len(fingerprints),
        functions=n_funcs,
        pct_all_disappear=pct(n_all, n_funcs),
        pct_no_disappear=pct(n_none, n_funcs),
        pct_in_train=(
            pct(sum(in_train_flags), len(in_train_flags))
            if in_train_flags
            else None
        ),
    )


# -- persistence -------------------------------------------------------------


def _sorted_examples(split: CorpusSplit) -> list[LabeledExample]:
    return sorted(
        split.examples,
        key=lambda ex: (ex.record.binary_id, ex.record.function_id),
    )


def save_corpus(
    directory: Path,
    splits: tuple[CorpusSplit, CorpusSplit, CorpusSplit],
    *,
    seed: int,
    ratios: tuple[float, float, float],
    mode: str,
    rejections: Optional[Counter] = None,
) -> dict:
    """Write split files plus the corpus manifest; returns the manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    counts = {}
    for split in splits:
        path = directory / f"{split.name}.jsonl"
        with open(path, "w", encoding="utf-8") as f:
            for ex in _sorted_examples(split):
                f.write(
                    json.dumps(ex.to_obj(), sort_keys=True, separators=(",", ":"))
                )
                f.write("\n")
        counts[split.name] = {
            "examples": len(split.examples),
            "binaries": len(split.binary_ids),
        }
    manifest = {
        "schema": CORPUS_SCHEMA,
        "seed": seed,
        "ratios": list(ratios),
        "mode": mode,
        "counts": counts,
        "rejections": dict(sorted((rejections or Counter()).items())),
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n"
    )
    return manifest


def load_corpus(
    directory: Path,
) -> tuple[CorpusSplit, CorpusSplit, CorpusSplit]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("schema") != CORPUS_SCHEMA:
        raise ValidationError(
            f"{directory}/manifest.json: unsupported schema "
            f"{manifest.get('schema')!r}"
        )
    out = []
    for name in ("train", "valid", "test"):
        split = CorpusSplit(name)
        with open(directory / f"{name}.jsonl", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    split.examples.append(LabeledExample.from_obj(json.loads(line)))
        out.append(split)
    return tuple(out)  # type: ignore[return-value]


def load_manifest(directory: Path) -> dict:
    return json.loads((Path(directory) / "manifest.json").read_text())


# -- stats rendering ---------------------------------------------------------

STATS_COLUMNS = (
    ("split", "Split"),
    ("binaries", "# Binaries"),
    ("variables", "# Variables"),
    ("pct_structs", "% Structs"),
    ("pct_disappear", "% Disappear"),
    ("unique_functions", "# Unique Functions"),
    ("functions", "# Functions"),
    ("pct_all_disappear", "% All Disappear"),
    ("pct_no_disappear", "% No Disappear"),
    ("pct_in_train", "% In-Train"),
)


def _fmt_pct(value: Optional[float]) -> str:
    if value is None:
        return "—"
    from decimal import ROUND_HALF_UP, Decimal

    return str(Decimal(str(value)).quantize(Decimal("0.1"), ROUND_HALF_UP))


def _stats_row(name: str, stats: CorpusStats) -> list[str]:
    row = [name]
    for key, _title in STATS_COLUMNS[1:]:
        v = getattr(stats, key)
        row.append(_fmt_pct(v) if key.startswith("pct_") else str(v))
    return row


def render_stats_text(rows: list[tuple[str, CorpusStats]]) -> str:
    table = [[title for _k, title in STATS_COLUMNS]]
    table += [_stats_row(name, s) for name, s in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(table[0]))]
    lines = []
    for r in table:
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_stats_csv(rows: list[tuple[str, CorpusStats]]) -> str:
    import csv
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([title for _k, title in STATS_COLUMNS])
    for name, s in rows:
        w.writerow(_stats_row(name, s))
    return buf.getvalue()
