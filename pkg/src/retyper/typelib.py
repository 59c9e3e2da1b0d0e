"""Canonical model of C-level types shared by every pipeline stage.

Types are immutable trees; two types are equal exactly when their canonical
renderings are equal (string comparison is the evaluation metric). The
rendering grammar is documented in docs/type-grammar.md. Typedefs and
const/volatile qualifiers are resolved away before a descriptor is built,
so they never appear here.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Optional

from .errors import EmptyCorpusError

DISAPPEAR_TEXT = "<disappear>"
UNKNOWN_TEXT = "<unknown>"
ANON_TAG = "<anon>"

DEFAULT_POINTER_SIZE = 8


class TypeDesc:
    """Base class for all type descriptors. Instances are frozen dataclasses."""

    __slots__ = ()


@dataclass(frozen=True)
class Primitive(TypeDesc):
    name: str
    size: int


@dataclass(frozen=True)
class Pointer(TypeDesc):
    target: TypeDesc


@dataclass(frozen=True)
class Array(TypeDesc):
    element: TypeDesc
    count: int  # 0 for flexible array members


@dataclass(frozen=True)
class Field:
    name: str
    type: TypeDesc
    offset: int
    size: int


@dataclass(frozen=True)
class Struct(TypeDesc):
    tag: str
    fields: tuple[Field, ...]
    size: int
    # Incomplete = declaration-only or a self-reference cut during DWARF
    # resolution; renders without a field list.
    incomplete: bool = False


@dataclass(frozen=True)
class Union(TypeDesc):
    tag: str
    members: tuple[Field, ...]
    size: int
    incomplete: bool = False


@dataclass(frozen=True)
class Enum(TypeDesc):
    tag: str
    size: int


@dataclass(frozen=True)
class FunctionType(TypeDesc):
    ret: TypeDesc
    params: tuple[TypeDesc, ...]


@dataclass(frozen=True)
class Void(TypeDesc):
    pass


@dataclass(frozen=True)
class Disappear(TypeDesc):
    pass


VOID = Void()
DISAPPEAR = Disappear()
# Reserved lexicon entry for below-threshold types. Identifiers cannot start
# with '<', so this can never collide with a real type's rendering.
UNKNOWN = Primitive(UNKNOWN_TEXT, 0)


def render_type(t: TypeDesc) -> str:
    """Canonical text for a descriptor. Deterministic and total."""
    if isinstance(t, Primitive):
        return t.name
    if isinstance(t, Pointer):
        return f"{render_type(t.target)} *"
    if isinstance(t, Array):
        return f"{render_type(t.element)}[{t.count}]"
    if isinstance(t, Struct):
        return _render_composite("struct", t.tag, t.fields, t.incomplete)
    if isinstance(t, Union):
        return _render_composite("union", t.tag, t.members, t.incomplete)
    if isinstance(t, Enum):
        return f"enum {t.tag}"
    if isinstance(t, FunctionType):
        params = ", ".join(render_type(p) for p in t.params)
        return f"{render_type(t.ret)} ({params})"
    if isinstance(t, Void):
        return "void"
    if isinstance(t, Disappear):
        return DISAPPEAR_TEXT
    raise TypeError(f"not a TypeDesc: {t!r}")


def _render_composite(
    keyword: str, tag: str, fields: tuple[Field, ...], incomplete: bool
) -> str:
    if incomplete:
        return f"{keyword} {tag}"
    if not fields:
        return f"{keyword} {tag} {{ }}"
    body = "; ".join(
        f"{render_type(f.type)} {f.name}@{f.offset}" for f in fields
    )
    return f"{keyword} {tag} {{ {body}; }}"


def types_equal(a: TypeDesc, b: TypeDesc) -> bool:
    """Exact, case-sensitive equality of canonical renderings."""
    return render_type(a) == render_type(b)


def size_of(t: TypeDesc, pointer_size: int = DEFAULT_POINTER_SIZE) -> int:
    """Byte size of a type; sentinel and code types have no layout (0)."""
    if isinstance(t, Primitive):
        return t.size
    if isinstance(t, Pointer):
        return pointer_size
    if isinstance(t, Array):
        return t.count * size_of(t.element, pointer_size)
    if isinstance(t, (Struct, Union)):
        return t.size
    if isinstance(t, Enum):
        return t.size
    if isinstance(t, (FunctionType, Void, Disappear)):
        return 0
    raise TypeError(f"not a TypeDesc: {t!r}")


def validate_type(t: TypeDesc) -> None:
    """Check well-formedness invariants, raising ValueError on violation."""
    if isinstance(t, Primitive):
        if not t.name:
            raise ValueError("primitive with empty name")
        if t.size < 0:
            raise ValueError(f"primitive {t.name!r} with negative size")
    elif isinstance(t, Pointer):
        validate_type(t.target)
    elif isinstance(t, Array):
        if t.count < 0:
            raise ValueError("array with negative count")
        validate_type(t.element)
    elif isinstance(t, Struct):
        prev = -1
        for f in t.fields:
            if f.offset <= prev:
                raise ValueError(
                    f"struct {t.tag}: field offsets not strictly increasing"
                )
            if f.size <= 0 and not (isinstance(f.type, Array) and f.type.count == 0):
                raise ValueError(f"struct {t.tag}: field {f.name!r} has size 0")
            if t.size and f.offset + f.size > t.size:
                raise ValueError(
                    f"struct {t.tag}: field {f.name!r} overruns total size"
                )
            validate_type(f.type)
            prev = f.offset
    elif isinstance(t, Union):
        for m in t.members:
            validate_type(m.type)
    elif isinstance(t, FunctionType):
        validate_type(t.ret)
        for p in t.params:
            validate_type(p)
    elif isinstance(t, (Enum, Void, Disappear)):
        pass
    else:
        raise TypeError(f"not a TypeDesc: {t!r}")


def type_to_obj(t: TypeDesc) -> dict:
    """Interchange-format `type` object (docs/interchange.md)."""
    if isinstance(t, Primitive):
        return {"kind": "primitive", "name": t.name, "size": t.size}
    if isinstance(t, Pointer):
        return {"kind": "pointer", "target": type_to_obj(t.target)}
    if isinstance(t, Array):
        return {"kind": "array", "element": type_to_obj(t.element), "count": t.count}
    if isinstance(t, Struct):
        return {
            "kind": "struct",
            "tag": t.tag,
            "size": t.size,
            "incomplete": t.incomplete,
            "fields": [_field_to_obj(f) for f in t.fields],
        }
    if isinstance(t, Union):
        return {
            "kind": "union",
            "tag": t.tag,
            "size": t.size,
            "incomplete": t.incomplete,
            "members": [_field_to_obj(m) for m in t.members],
        }
    if isinstance(t, Enum):
        return {"kind": "enum", "tag": t.tag, "size": t.size}
    if isinstance(t, FunctionType):
        return {
            "kind": "function",
            "return": type_to_obj(t.ret),
            "params": [type_to_obj(p) for p in t.params],
        }
    if isinstance(t, Void):
        return {"kind": "void"}
    if isinstance(t, Disappear):
        return {"kind": "disappear"}
    raise TypeError(f"not a TypeDesc: {t!r}")


def _field_to_obj(f: Field) -> dict:
    return {
        "name": f.name,
        "type": type_to_obj(f.type),
        "offset": f.offset,
        "size": f.size,
    }


def type_from_obj(obj: object) -> TypeDesc:
    """Decode an interchange `type` object; raises ValueError on bad input."""
    if not isinstance(obj, dict):
        raise ValueError(f"type object must be a mapping, got {type(obj).__name__}")
    kind = obj.get("kind")
    if kind == "primitive":
        return Primitive(_req_str(obj, "name"), _req_int(obj, "size"))
    if kind == "pointer":
        return Pointer(type_from_obj(_req(obj, "target")))
    if kind == "array":
        count = _req_int(obj, "count")
        if count < 0:
            raise ValueError("array count must be non-negative")
        return Array(type_from_obj(_req(obj, "element")), count)
    if kind == "struct":
        return Struct(
            _req_str(obj, "tag"),
            tuple(_field_from_obj(f) for f in _req(obj, "fields")),
            _req_int(obj, "size"),
            bool(obj.get("incomplete", False)),
        )
    if kind == "union":
        return Union(
            _req_str(obj, "tag"),
            tuple(_field_from_obj(m) for m in _req(obj, "members")),
            _req_int(obj, "size"),
            bool(obj.get("incomplete", False)),
        )
    if kind == "enum":
        return Enum(_req_str(obj, "tag"), _req_int(obj, "size"))
    if kind == "function":
        return FunctionType(
            type_from_obj(_req(obj, "return")),
            tuple(type_from_obj(p) for p in _req(obj, "params")),
        )
    if kind == "void":
        return VOID
    if kind == "disappear":
        return DISAPPEAR
    raise ValueError(f"unknown type kind {kind!r}")


def _field_from_obj(obj: object) -> Field:
    if not isinstance(obj, dict):
        raise ValueError("field must be a mapping")
    return Field(
        _req_str(obj, "name"),
        type_from_obj(_req(obj, "type")),
        _req_int(obj, "offset"),
        _req_int(obj, "size"),
    )


def _req(obj: dict, key: str) -> object:
    if key not in obj:
        raise ValueError(f"type object missing field {key!r}")
    return obj[key]


def _req_str(obj: dict, key: str) -> str:
    v = _req(obj, key)
    if not isinstance(v, str):
        raise ValueError(f"field {key!r} must be a string")
    return v


def _req_int(obj: dict, key: str) -> int:
    v = _req(obj, key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ValueError(f"field {key!r} must be an integer")
    return v


@dataclass(frozen=True)
class LexiconEntry:
    text: str
    type: TypeDesc
    count: int


@dataclass(frozen=True)
class TypeLexicon:
    """Frequency-ranked closed vocabulary of canonical types.

    Entries are sorted by descending count, ties broken lexicographically by
    canonical text. `<disappear>` and `<unknown>` are always present (count 0
    when unseen). Ranks are the classifier's label space.
    """

    entries: tuple[LexiconEntry, ...]
    min_count: int
    _rank: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ranks: dict[str, int] = {}
        for i, e in enumerate(self.entries):
            if e.text in ranks:
                raise ValueError(f"duplicate lexicon entry {e.text!r}")
            ranks[e.text] = i
        if DISAPPEAR_TEXT not in ranks or UNKNOWN_TEXT not in ranks:
            raise ValueError("lexicon missing reserved entries")
        object.__setattr__(self, "_rank", ranks)

    def __len__(self) -> int:
        return len(self.entries)

    def rank_of(self, text: str) -> Optional[int]:
        return self._rank.get(text)

    def type_at(self, rank: int) -> TypeDesc:
        return self.entries[rank].type

    @property
    def unknown_rank(self) -> int:
        return self._rank[UNKNOWN_TEXT]

    @property
    def disappear_rank(self) -> int:
        return self._rank[DISAPPEAR_TEXT]

    def label_for(self, t: TypeDesc) -> int:
        """Training label for a gold type; out-of-lexicon maps to <unknown>."""
        r = self._rank.get(render_type(t))
        return self.unknown_rank if r is None else r

    def to_obj(self) -> dict:
        return {
            "schema": 1,
            "min_count": self.min_count,
            "entries": [
                {"text": e.text, "count": e.count, "type": type_to_obj(e.type)}
                for e in self.entries
            ],
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "TypeLexicon":
        if obj.get("schema") != 1:
            raise ValueError(f"unsupported lexicon schema {obj.get('schema')!r}")
        entries = tuple(
            LexiconEntry(e["text"], type_from_obj(e["type"]), int(e["count"]))
            for e in obj["entries"]
        )
        return cls(entries, int(obj["min_count"]))

    def content_hash(self) -> str:
        import hashlib
        import json

        blob = json.dumps(self.to_obj(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def build_type_lexicon(
    gold_types: Iterable[TypeDesc], min_count: int = 1
) -> TypeLexicon:
    """Count gold types and keep those seen at least min_count times.

    `gold_types` is the stream of per-variable ground-truth types over the
    training corpus. Reserved entries are appended with their observed counts
    (possibly 0) and are exempt from the threshold.
    """
    if min_count < 1:
        raise ValueError("min_count must be positive")
    counts: dict[str, int] = {}
    reprs: dict[str, TypeDesc] = {}
    n = 0
    for t in gold_types:
        n += 1
        text = render_type(t)
        counts[text] = counts.get(text, 0) + 1
        reprs.setdefault(text, t)
    if n == 0:
        raise EmptyCorpusError("cannot build a type lexicon from an empty corpus")

    reserved = {DISAPPEAR_TEXT: DISAPPEAR, UNKNOWN_TEXT: UNKNOWN}
    entries = []
    for text, count in counts.items():
        if text in reserved:
            continue
        if count >= min_count:
            entries.append(LexiconEntry(text, reprs[text], count))
    for text, t in reserved.items():
        entries.append(LexiconEntry(text, t, counts.get(text, 0)))
    entries.sort(key=lambda e: (-e.count, e.text))
    return TypeLexicon(tuple(entries), min_count)
