"""Ground-truth variable extraction from DWARF debug sections.

Builds a per-binary index mapping functions to their declared variables and
resolved types, plus the set of every declared name. Typedefs and qualifiers
are resolved away; the outermost typedef name is kept as metadata. Function
identity is the linkage name (or DWARF name) plus entry address, so static
functions sharing a name across compilation units stay distinct.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .. import typelib
from ..errors import NoDebugInfoError
from ..typelib import (
    ANON_TAG,
    VOID,
    Array,
    Enum,
    Field,
    FunctionType,
    Pointer,
    Primitive,
    Struct,
    TypeDesc,
    Union,
    type_from_obj,
    type_to_obj,
)
from . import parser as dw
from .elf import ElfFile

log = logging.getLogger(__name__)

INDEX_SCHEMA = 1
SIDECAR_SUFFIX = ".dwarfindex"


@dataclass(frozen=True)
class DwarfVariable:
    name: str
    type: TypeDesc
    kind: str  # parameter | local | global
    declaring_function: Optional[str] = None
    typedef_name: Optional[str] = None


@dataclass
class FunctionEntry:
    function_id: str
    name: str
    entry: int
    linkage_name: Optional[str]
    variables: list[DwarfVariable] = field(default_factory=list)

    def var_names(self) -> set[str]:
        return {v.name for v in self.variables}


@dataclass
class DwarfIndex:
    binary_id: str
    pointer_size: int
    per_function: dict[str, FunctionEntry]
    globals: dict[str, DwarfVariable]
    warnings: list[str] = field(default_factory=list)
    _ids_by_name: dict[str, list[str]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._ids_by_name:
            for fid, entry in self.per_function.items():
                self._ids_by_name.setdefault(entry.name, []).append(fid)

    @property
    def declared_names(self) -> set[str]:
        names = set(self.globals)
        for entry in self.per_function.values():
            names |= entry.var_names()
        return names

    def resolve_function(self, function_id: str) -> Optional[FunctionEntry]:
        """Exact id match, falling back to a unique plain-name match."""
        entry = self.per_function.get(function_id)
        if entry is not None:
            return entry
        name = function_id.split("@", 1)[0]
        ids = self._ids_by_name.get(name, [])
        if len(ids) == 1:
            return self.per_function[ids[0]]
        return None

    def lookup(self, function_id: str, name: str) -> Optional[TypeDesc]:
        """DWARF type for a name scoped to a function, with global fallback."""
        entry = self.resolve_function(function_id)
        if entry is not None:
            for v in entry.variables:
                if v.name == name:
                    return v.type
        g = self.globals.get(name)
        return g.type if g is not None else None

    def to_obj(self) -> dict:
        return {
            "schema": INDEX_SCHEMA,
            "binary_id": self.binary_id,
            "pointer_size": self.pointer_size,
            "functions": {
                fid: {
                    "name": e.name,
                    "entry": e.entry,
                    "linkage_name": e.linkage_name,
                    "variables": [_var_to_obj(v) for v in e.variables],
                }
                for fid, e in sorted(self.per_function.items())
            },
            "globals": {
                name: _var_to_obj(v) for name, v in sorted(self.globals.items())
            },
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "DwarfIndex":
        if obj.get("schema") != INDEX_SCHEMA:
            raise ValueError(f"unsupported index schema {obj.get('schema')!r}")
        per_function = {}
        for fid, e in obj["functions"].items():
            per_function[fid] = FunctionEntry(
                fid,
                e["name"],
                int(e["entry"]),
                e.get("linkage_name"),
                [_var_from_obj(v) for v in e["variables"]],
            )
        globals_ = {n: _var_from_obj(v) for n, v in obj["globals"].items()}
        return cls(
            obj["binary_id"],
            int(obj["pointer_size"]),
            per_function,
            globals_,
            list(obj.get("warnings", [])),
        )

    def save(self, directory: Path) -> Path:
        path = Path(directory) / f"{self.binary_id}{SIDECAR_SUFFIX}"
        path.write_text(json.dumps(self.to_obj(), sort_keys=True, indent=1) + "\n")
        return path

    @classmethod
    def load(cls, path: Path) -> "DwarfIndex":
        return cls.from_obj(json.loads(Path(path).read_text()))


def _var_to_obj(v: DwarfVariable) -> dict:
    obj = {"name": v.name, "kind": v.kind, "type": type_to_obj(v.type)}
    if v.declaring_function is not None:
        obj["function"] = v.declaring_function
    if v.typedef_name is not None:
        obj["typedef"] = v.typedef_name
    return obj


def _var_from_obj(obj: dict) -> DwarfVariable:
    return DwarfVariable(
        obj["name"],
        type_from_obj(obj["type"]),
        obj["kind"],
        obj.get("function"),
        obj.get("typedef"),
    )


def binary_id_of(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def index_binary(path: Path, pointer_size: int = 8) -> DwarfIndex:
    """Extract the ground-truth index from an unstripped ELF binary."""
    data = Path(path).read_bytes()
    binary_id = hashlib.sha256(data).hexdigest()
    elf = ElfFile(data)
    info = elf.section(".debug_info")
    abbrev = elf.section(".debug_abbrev")
    if not info or not abbrev:
        raise NoDebugInfoError(f"{path}: no DWARF debug sections")
    sections = dw.DwarfSections(
        info=info,
        abbrev=abbrev,
        str_=elf.section(".debug_str") or b"",
        line_str=elf.section(".debug_line_str") or b"",
        str_offsets=elf.section(".debug_str_offsets") or b"",
        addr=elf.section(".debug_addr") or b"",
    )
    units = dw.parse_units(sections)
    dies = dw.index_dies(units)
    builder = _IndexBuilder(binary_id, pointer_size, dies)
    for cu in units:
        builder.visit_unit(cu)
    return builder.finish()


class _IndexBuilder:
    def __init__(self, binary_id: str, pointer_size: int, dies: dict[int, dw.Die]):
        self.binary_id = binary_id
        self.pointer_size = pointer_size
        self.dies = dies
        self.per_function: dict[str, FunctionEntry] = {}
        self.globals: dict[str, DwarfVariable] = {}
        self.warnings: list[str] = []
        self._type_cache: dict[int, TypeDesc] = {}

    def finish(self) -> DwarfIndex:
        return DwarfIndex(
            self.binary_id,
            self.pointer_size,
            self.per_function,
            self.globals,
            self.warnings,
        )

    def warn(self, msg: str):
        self.warnings.append(msg)
        log.warning("%s: %s", self.binary_id[:12], msg)

    def visit_unit(self, cu: dw.CompileUnit):
        for child in cu.root.children:
            if child.tag == dw.TAG_subprogram:
                self.visit_subprogram(child)
            elif child.tag == dw.TAG_variable:
                self.visit_global(child)

    # -- attribute helpers ---------------------------------------------------

    def _chase(self, die: dw.Die, at: int):
        """Attribute lookup following specification/abstract_origin links."""
        seen = set()
        current: Optional[dw.Die] = die
        while current is not None and current.offset not in seen:
            seen.add(current.offset)
            if at in current.attrs:
                return current.attrs[at]
            nxt = current.attr(dw.AT_specification) or current.attr(
                dw.AT_abstract_origin
            )
            current = (
                self.dies.get(nxt.offset) if isinstance(nxt, dw.DieRef) else None
            )
        return None

    def _name_of(self, die: dw.Die) -> Optional[str]:
        name = self._chase(die, dw.AT_name)
        return name if isinstance(name, str) else None

    # -- subprograms ---------------------------------------------------------

    def visit_subprogram(self, die: dw.Die):
        if die.attr(dw.AT_declaration):
            return
        low_pc = self._chase(die, dw.AT_low_pc)
        if not isinstance(low_pc, int):
            return  # abstract instance or declaration; no concrete entry
        name = self._name_of(die)
        if name is None:
            return
        linkage = self._chase(die, dw.AT_linkage_name) or self._chase(
            die, dw.AT_MIPS_linkage_name
        )
        linkage_name = linkage if isinstance(linkage, str) else None
        fid = f"{linkage_name or name}@{low_pc:#x}"
        entry = self.per_function.get(fid)
        if entry is None:
            entry = FunctionEntry(fid, name, low_pc, linkage_name)
            self.per_function[fid] = entry
        seen = entry.var_names()
        self._collect_vars(die, entry, fid, seen)

    def _collect_vars(
        self, die: dw.Die, entry: FunctionEntry, fid: str, seen: set[str]
    ):
        for child in die.children:
            if child.tag in (dw.TAG_formal_parameter, dw.TAG_variable):
                self._add_var(child, entry, fid, seen)
            elif child.tag == dw.TAG_lexical_block:
                self._collect_vars(child, entry, fid, seen)
            # nested subprograms and inlined subroutines keep their own scope

    def _add_var(self, die: dw.Die, entry: FunctionEntry, fid: str, seen: set[str]):
        if die.attr(dw.AT_artificial):
            return
        name = self._name_of(die)
        if name is None:
            return
        if name in seen:
            self.warn(f"{fid}: shadowed variable {name!r} keeps outermost type")
            return
        kind = "parameter" if die.tag == dw.TAG_formal_parameter else "local"
        t, typedef_name = self._resolve_attr_type(die, f"{fid}:{name}")
        seen.add(name)
        entry.variables.append(DwarfVariable(name, t, kind, fid, typedef_name))

    def visit_global(self, die: dw.Die):
        if die.attr(dw.AT_artificial) or die.attr(dw.AT_declaration):
            return
        name = self._name_of(die)
        if name is None or name in self.globals:
            return
        t, typedef_name = self._resolve_attr_type(die, f"global:{name}")
        self.globals[name] = DwarfVariable(name, t, "global", None, typedef_name)

    # -- type resolution -----------------------------------------------------

    def _resolve_attr_type(
        self, die: dw.Die, context: str
    ) -> tuple[TypeDesc, Optional[str]]:
        ref = self._chase(die, dw.AT_type)
        if not isinstance(ref, dw.DieRef):
            self.warn(f"{context}: no resolvable type, recording void")
            return VOID, None
        target = self.dies.get(ref.offset)
        if target is None:
            self.warn(f"{context}: dangling type reference, recording void")
            return VOID, None
        typedef_name = (
            self._name_of(target) if target.tag == dw.TAG_typedef else None
        )
        t, _clean = self._resolve_type(target, ())
        return t, typedef_name

    def _resolve_type(
        self, die: dw.Die, stack: tuple[int, ...]
    ) -> tuple[TypeDesc, bool]:
        """Resolve a type DIE to a descriptor.

        `stack` holds composite DIE offsets currently being expanded; hitting
        one again cuts the cycle with an incomplete composite. Only results
        untouched by a cut are cached, so every top-level resolution of the
        same DIE yields the same tree regardless of visit order.
        """
        cached = self._type_cache.get(die.offset)
        if cached is not None:
            return cached, True
        t, clean = self._resolve_uncached(die, stack)
        if clean:
            self._type_cache[die.offset] = t
        return t, clean

    def _resolve_ref(
        self, die: dw.Die, stack: tuple[int, ...]
    ) -> tuple[Optional[TypeDesc], bool]:
        ref = die.attr(dw.AT_type)
        if not isinstance(ref, dw.DieRef):
            return None, True
        target = self.dies.get(ref.offset)
        if target is None:
            return None, True
        return self._resolve_type(target, stack)

    def _resolve_uncached(
        self, die: dw.Die, stack: tuple[int, ...]
    ) -> tuple[TypeDesc, bool]:
        tag = die.tag

        if tag == dw.TAG_base_type:
            name = self._name_of(die) or f"base{int(die.attr(dw.AT_byte_size, 0)) * 8}"
            return Primitive(name, int(die.attr(dw.AT_byte_size, 0))), True

        if tag in (
            dw.TAG_pointer_type,
            dw.TAG_reference_type,
            dw.TAG_rvalue_reference_type,
        ):
            inner, clean = self._resolve_ref(die, stack)
            return Pointer(inner if inner is not None else VOID), clean

        if tag in (
            dw.TAG_typedef,
            dw.TAG_const_type,
            dw.TAG_volatile_type,
            dw.TAG_restrict_type,
            dw.TAG_atomic_type,
        ):
            inner, clean = self._resolve_ref(die, stack)
            return (inner if inner is not None else VOID), clean

        if tag == dw.TAG_array_type:
            inner, clean = self._resolve_ref(die, stack)
            element = inner if inner is not None else VOID
            counts = []
            for sub in die.children:
                if sub.tag != dw.TAG_subrange_type:
                    continue
                count = sub.attr(dw.AT_count)
                upper = sub.attr(dw.AT_upper_bound)
                if isinstance(count, int):
                    counts.append(count)
                elif isinstance(upper, int):
                    counts.append(upper + 1)
                else:
                    counts.append(0)  # flexible or unknown bound
            if not counts:
                counts = [0]
            t: TypeDesc = element
            for c in reversed(counts):
                t = Array(t, c)
            return t, clean

        if tag in (dw.TAG_structure_type, dw.TAG_union_type):
            return self._resolve_composite(die, stack)

        if tag == dw.TAG_enumeration_type:
            name = self._name_of(die) or ANON_TAG
            return Enum(name, int(die.attr(dw.AT_byte_size, 4))), True

        if tag == dw.TAG_subroutine_type:
            ret, clean = self._resolve_ref(die, stack)
            params = []
            for child in die.children:
                if child.tag == dw.TAG_formal_parameter:
                    p, c2 = self._resolve_ref(child, stack)
                    params.append(p if p is not None else VOID)
                    clean = clean and c2
            return FunctionType(ret if ret is not None else VOID, tuple(params)), clean

        self.warn(f"unhandled type tag {tag:#x} at {die.offset:#x}, recording void")
        return VOID, True

    def _resolve_composite(
        self, die: dw.Die, stack: tuple[int, ...]
    ) -> tuple[TypeDesc, bool]:
        is_union = die.tag == dw.TAG_union_type
        tag_name = self._name_of(die) or ANON_TAG
        size = int(die.attr(dw.AT_byte_size, 0))
        make = Union if is_union else Struct

        if die.offset in stack:
            return make(tag_name, (), size, incomplete=True), False
        if die.attr(dw.AT_declaration):
            return make(tag_name, (), size, incomplete=True), True

        stack = stack + (die.offset,)
        fields: list[Field] = []
        clean = True
        prev_offset = -1
        for child in die.children:
            if child.tag != dw.TAG_member:
                continue
            if child.attr(dw.AT_bit_size) is not None:
                self.warn(f"{tag_name}: skipping bitfield member")
                continue
            member_name = self._name_of(child) or ANON_TAG
            offset = _member_offset(child)
            if offset is None:
                offset = 0 if is_union else prev_offset + 1
                if not is_union:
                    self.warn(f"{tag_name}.{member_name}: unreadable member offset")
            mtype, c2 = self._resolve_ref(child, stack)
            clean = clean and c2
            if mtype is None:
                mtype = VOID
            msize = typelib.size_of(mtype, self.pointer_size)
            if not is_union and offset <= prev_offset:
                self.warn(
                    f"{tag_name}.{member_name}: non-increasing offset, skipping"
                )
                continue
            fields.append(Field(member_name, mtype, offset, msize))
            if not is_union:
                prev_offset = offset
        return make(tag_name, tuple(fields), size), clean


def _member_offset(die: dw.Die) -> Optional[int]:
    loc = die.attr(dw.AT_data_member_location)
    if isinstance(loc, int):
        return loc
    if isinstance(loc, bytes) and loc and loc[0] == 0x23:  # DW_OP_plus_uconst
        r = dw.Reader(loc, 1)
        return r.uleb()
    if loc is None:
        return None
    return None
