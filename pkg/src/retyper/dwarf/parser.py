"""DWARF v4/v5 .debug_info parser.

Parses compile units into DIE trees with resolved attribute values. Only the
sections and forms produced by mainstream C compilers are handled; location
expressions are carried as opaque bytes and never evaluated. Unsupported
DWARF versions are rejected explicitly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from ..errors import DwarfParseError

# Tags
TAG_array_type = 0x01
TAG_enumeration_type = 0x04
TAG_formal_parameter = 0x05
TAG_lexical_block = 0x0B
TAG_member = 0x0D
TAG_pointer_type = 0x0F
TAG_reference_type = 0x10
TAG_compile_unit = 0x11
TAG_structure_type = 0x13
TAG_subroutine_type = 0x15
TAG_typedef = 0x16
TAG_union_type = 0x17
TAG_unspecified_parameters = 0x18
TAG_variant = 0x19
TAG_inlined_subroutine = 0x1D
TAG_subrange_type = 0x21
TAG_base_type = 0x24
TAG_const_type = 0x26
TAG_enumerator = 0x28
TAG_subprogram = 0x2E
TAG_variable = 0x34
TAG_volatile_type = 0x35
TAG_restrict_type = 0x37
TAG_rvalue_reference_type = 0x42
TAG_atomic_type = 0x47

# Attributes
AT_sibling = 0x01
AT_location = 0x02
AT_name = 0x03
AT_byte_size = 0x0B
AT_bit_size = 0x0D
AT_low_pc = 0x11
AT_high_pc = 0x12
AT_upper_bound = 0x2F
AT_abstract_origin = 0x31
AT_artificial = 0x34
AT_count = 0x37
AT_data_member_location = 0x38
AT_declaration = 0x3C
AT_external = 0x3F
AT_specification = 0x47
AT_type = 0x49
AT_linkage_name = 0x6E
AT_str_offsets_base = 0x72
AT_addr_base = 0x73
AT_MIPS_linkage_name = 0x2007

# Forms
F_addr = 0x01
F_block2 = 0x03
F_block4 = 0x04
F_data2 = 0x05
F_data4 = 0x06
F_data8 = 0x07
F_string = 0x08
F_block = 0x09
F_block1 = 0x0A
F_data1 = 0x0B
F_flag = 0x0C
F_sdata = 0x0D
F_strp = 0x0E
F_udata = 0x0F
F_ref_addr = 0x10
F_ref1 = 0x11
F_ref2 = 0x12
F_ref4 = 0x13
F_ref8 = 0x14
F_ref_udata = 0x15
F_indirect = 0x16
F_sec_offset = 0x17
F_exprloc = 0x18
F_flag_present = 0x19
F_strx = 0x1A
F_addrx = 0x1B
F_ref_sup4 = 0x1C
F_strp_sup = 0x1D
F_data16 = 0x1E
F_line_strp = 0x1F
F_ref_sig8 = 0x20
F_implicit_const = 0x21
F_loclistx = 0x22
F_rnglistx = 0x23
F_ref_sup8 = 0x24
F_strx1 = 0x25
F_strx2 = 0x26
F_strx3 = 0x27
F_strx4 = 0x28
F_addrx1 = 0x29
F_addrx2 = 0x2A
F_addrx3 = 0x2B
F_addrx4 = 0x2C

DW_UT_compile = 0x01


class Reader:
    """Little-endian byte cursor with LEB128 support."""

    __slots__ = ("data", "pos")

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def u8(self) -> int:
        v = self.data[self.pos]
        self.pos += 1
        return v

    def u16(self) -> int:
        (v,) = struct.unpack_from("<H", self.data, self.pos)
        self.pos += 2
        return v

    def u24(self) -> int:
        b = self.data[self.pos : self.pos + 3]
        self.pos += 3
        return int.from_bytes(b, "little")

    def u32(self) -> int:
        (v,) = struct.unpack_from("<I", self.data, self.pos)
        self.pos += 4
        return v

    def u64(self) -> int:
        (v,) = struct.unpack_from("<Q", self.data, self.pos)
        self.pos += 8
        return v

    def uleb(self) -> int:
        result = 0
        shift = 0
        while True:
            b = self.data[self.pos]
            self.pos += 1
            result |= (b & 0x7F) << shift
            if not b & 0x80:
                return result
            shift += 7

    def sleb(self) -> int:
        result = 0
        shift = 0
        while True:
            b = self.data[self.pos]
            self.pos += 1
            result |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                if b & 0x40:
                    result -= 1 << shift
                return result

    def bytes(self, n: int) -> bytes:
        v = self.data[self.pos : self.pos + n]
        self.pos += n
        return v

    def cstr(self) -> str:
        end = self.data.find(b"\x00", self.pos)
        if end < 0:
            raise DwarfParseError("unterminated string", self.pos)
        v = self.data[self.pos : end].decode("utf-8", "replace")
        self.pos = end + 1
        return v


@dataclass(frozen=True)
class DieRef:
    """Reference to another DIE by absolute .debug_info offset."""

    offset: int


@dataclass(frozen=True)
class AbbrevDecl:
    tag: int
    has_children: bool
    attrs: tuple[tuple[int, int, int | None], ...]  # (attr, form, implicit_const)


@dataclass
class Die:
    offset: int  # absolute within .debug_info
    tag: int
    attrs: dict[int, object]
    children: list["Die"] = field(default_factory=list)

    def attr(self, at: int, default=None):
        return self.attrs.get(at, default)


@dataclass
class CompileUnit:
    offset: int
    version: int
    addr_size: int
    offset_size: int  # 4 for DWARF32, 8 for DWARF64
    root: Die


@dataclass
class DwarfSections:
    info: bytes
    abbrev: bytes
    str_: bytes = b""
    line_str: bytes = b""
    str_offsets: bytes = b""
    addr: bytes = b""


def parse_abbrev_table(data: bytes, offset: int) -> dict[int, AbbrevDecl]:
    r = Reader(data, offset)
    table: dict[int, AbbrevDecl] = {}
    while True:
        code = r.uleb()
        if code == 0:
            return table
        tag = r.uleb()
        has_children = r.u8() != 0
        attrs = []
        while True:
            at = r.uleb()
            form = r.uleb()
            if form == F_implicit_const:
                attrs.append((at, form, r.sleb()))
                continue
            if at == 0 and form == 0:
                break
            attrs.append((at, form, None))
        table[code] = AbbrevDecl(tag, has_children, tuple(attrs))


def parse_units(sections: DwarfSections) -> list[CompileUnit]:
    """Parse every compile unit in .debug_info; non-compile units are skipped."""
    units = []
    data = sections.info
    abbrev_cache: dict[int, dict[int, AbbrevDecl]] = {}
    pos = 0
    while pos < len(data):
        cu = _parse_unit(sections, pos, abbrev_cache)
        pos = cu[0]
        if cu[1] is not None:
            units.append(cu[1])
    return units


def _parse_unit(
    sections: DwarfSections,
    cu_offset: int,
    abbrev_cache: dict[int, dict[int, AbbrevDecl]],
) -> tuple[int, CompileUnit | None]:
    data = sections.info
    r = Reader(data, cu_offset)
    unit_length = r.u32()
    offset_size = 4
    if unit_length == 0xFFFFFFFF:
        unit_length = r.u64()
        offset_size = 8
    next_offset = r.pos + unit_length
    version = r.u16()
    if version == 5:
        unit_type = r.u8()
        addr_size = r.u8()
        abbrev_offset = r.u32() if offset_size == 4 else r.u64()
        if unit_type != DW_UT_compile:
            return next_offset, None
    elif version == 4:
        abbrev_offset = r.u32() if offset_size == 4 else r.u64()
        addr_size = r.u8()
    else:
        raise DwarfParseError(
            f"DWARF version {version} is not supported (only 4 and 5)", cu_offset
        )

    if abbrev_offset not in abbrev_cache:
        abbrev_cache[abbrev_offset] = parse_abbrev_table(
            sections.abbrev, abbrev_offset
        )
    abbrevs = abbrev_cache[abbrev_offset]

    # First pass: raw attribute values, so the CU's own str_offsets/addr bases
    # can be read before strx/addrx forms are materialized.
    raw_root = _parse_die_tree(r, abbrevs, next_offset, offset_size)
    if raw_root is None:
        raise DwarfParseError("compile unit with no root DIE", cu_offset)

    ctx = _ResolveCtx(sections, cu_offset, offset_size, addr_size)
    ctx.str_offsets_base = _raw_base(raw_root, AT_str_offsets_base, default=8)
    ctx.addr_base = _raw_base(raw_root, AT_addr_base, default=8)
    root = _materialize(raw_root, ctx)
    return next_offset, CompileUnit(cu_offset, version, addr_size, offset_size, root)


@dataclass
class _RawDie:
    offset: int
    tag: int
    attrs: list[tuple[int, int, object]]  # (attr, form, raw value)
    children: list["_RawDie"]


def _parse_die_tree(
    r: Reader, abbrevs: dict[int, AbbrevDecl], end: int, offset_size: int
) -> _RawDie | None:
    root: _RawDie | None = None
    stack: list[_RawDie] = []
    while r.pos < end:
        die_offset = r.pos
        code = r.uleb()
        if code == 0:
            if stack:
                stack.pop()
                if not stack:
                    break
            continue
        decl = abbrevs.get(code)
        if decl is None:
            raise DwarfParseError(f"unknown abbrev code {code}", die_offset)
        attrs = []
        for at, form, implicit in decl.attrs:
            attrs.append((at, form, _read_raw(r, form, implicit, offset_size)))
        die = _RawDie(die_offset, decl.tag, attrs, [])
        if root is None:
            root = die
        elif stack:
            stack[-1].children.append(die)
        if decl.has_children:
            stack.append(die)
        elif root is die:
            break
    return root


def _read_raw(r: Reader, form: int, implicit: int | None, offset_size: int) -> object:
    if form == F_addr:
        return r.u64()
    if form in (F_data1, F_ref1, F_strx1, F_addrx1, F_flag):
        return r.u8()
    if form in (F_data2, F_ref2, F_strx2, F_addrx2):
        return r.u16()
    if form in (F_strx3, F_addrx3):
        return r.u24()
    if form in (F_data4, F_ref4, F_strx4, F_addrx4, F_ref_sup4):
        return r.u32()
    if form in (F_data8, F_ref8, F_ref_sig8, F_ref_sup8):
        return r.u64()
    if form == F_data16:
        return r.bytes(16)
    if form == F_sdata:
        return r.sleb()
    if form in (F_udata, F_ref_udata, F_strx, F_addrx, F_loclistx, F_rnglistx):
        return r.uleb()
    if form == F_string:
        return r.cstr()
    if form in (F_strp, F_line_strp, F_sec_offset, F_ref_addr, F_strp_sup):
        return r.u32() if offset_size == 4 else r.u64()
    if form == F_exprloc or form == F_block:
        return r.bytes(r.uleb())
    if form == F_block1:
        return r.bytes(r.u8())
    if form == F_block2:
        return r.bytes(r.u16())
    if form == F_block4:
        return r.bytes(r.u32())
    if form == F_flag_present:
        return 1
    if form == F_implicit_const:
        return implicit
    if form == F_indirect:
        actual = r.uleb()
        return (actual, _read_raw(r, actual, None, offset_size))
    raise DwarfParseError(f"unsupported form {form:#x}", r.pos)


def _raw_base(raw_root: _RawDie, at: int, default: int) -> int:
    for a, _form, raw in raw_root.attrs:
        if a == at and isinstance(raw, int):
            return raw
    return default


@dataclass
class _ResolveCtx:
    sections: DwarfSections
    cu_offset: int
    offset_size: int
    addr_size: int
    str_offsets_base: int = 8
    addr_base: int = 8


def _materialize(raw: _RawDie, ctx: _ResolveCtx) -> Die:
    attrs: dict[int, object] = {}
    for at, form, value in raw.attrs:
        if form == F_indirect:
            form, value = value  # type: ignore[misc]
        attrs[at] = _resolve_value(form, value, ctx)
    die = Die(raw.offset, raw.tag, attrs)
    die.children = [_materialize(c, ctx) for c in raw.children]
    return die


def _resolve_value(form: int, value: object, ctx: _ResolveCtx) -> object:
    if form in (F_ref1, F_ref2, F_ref4, F_ref8, F_ref_udata):
        return DieRef(ctx.cu_offset + value)  # type: ignore[operator]
    if form == F_ref_addr:
        return DieRef(value)  # type: ignore[arg-type]
    if form == F_strp:
        return _cstr_at(ctx.sections.str_, value, ".debug_str")  # type: ignore[arg-type]
    if form == F_line_strp:
        return _cstr_at(ctx.sections.line_str, value, ".debug_line_str")  # type: ignore[arg-type]
    if form in (F_strx, F_strx1, F_strx2, F_strx3, F_strx4):
        table = ctx.sections.str_offsets
        pos = ctx.str_offsets_base + value * ctx.offset_size  # type: ignore[operator]
        if pos + ctx.offset_size > len(table):
            raise DwarfParseError("strx index outside .debug_str_offsets", pos)
        off = int.from_bytes(table[pos : pos + ctx.offset_size], "little")
        return _cstr_at(ctx.sections.str_, off, ".debug_str")
    if form in (F_addrx, F_addrx1, F_addrx2, F_addrx3, F_addrx4):
        table = ctx.sections.addr
        pos = ctx.addr_base + value * ctx.addr_size  # type: ignore[operator]
        if pos + ctx.addr_size > len(table):
            raise DwarfParseError("addrx index outside .debug_addr", pos)
        return int.from_bytes(table[pos : pos + ctx.addr_size], "little")
    if form == F_flag or form == F_flag_present:
        return bool(value)
    return value


def _cstr_at(data: bytes, offset: int, name: str) -> str:
    if offset >= len(data):
        raise DwarfParseError(f"string offset outside {name}", offset)
    end = data.find(b"\x00", offset)
    if end < 0:
        raise DwarfParseError(f"unterminated string in {name}", offset)
    return data[offset:end].decode("utf-8", "replace")


def index_dies(units: list[CompileUnit]) -> dict[int, Die]:
    """Map absolute .debug_info offset -> DIE, for reference resolution."""
    out: dict[int, Die] = {}

    def walk(d: Die):
        out[d.offset] = d
        for c in d.children:
            walk(c)

    for cu in units:
        walk(cu.root)
    return out
