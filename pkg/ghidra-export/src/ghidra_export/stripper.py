"""Produce the stripped twin of a debug-build binary.

The pipeline decompiles every binary twice — once with DWARF attached, once
stripped — so both views must come from the *same* code bytes. objcopy
--strip-all removes symbol and debug sections without touching allocated
content, and the tests verify .text/.data byte-identity through an
independent section dump.

The ELF reading here is the bare minimum to list section names and extents
(both widths, both byte orders); it exists so the precondition "input still
has its debug info" is checked from the file itself rather than trusted.
"""

from __future__ import annotations

import struct
import subprocess
from dataclasses import dataclass
from pathlib import Path

_ELF_MAGIC = b"\x7fELF"
_SHT_NULL = 0


class StripError(RuntimeError):
    pass


@dataclass(frozen=True)
class Section:
    name: str
    sh_type: int
    offset: int
    size: int


def elf_sections(path) -> list:
    """Section name/type/extent table of an ELF file, in header order."""
    data = Path(path).read_bytes()
    if data[:4] != _ELF_MAGIC:
        raise StripError(f"{path}: not an ELF file")
    ei_class, ei_data = data[4], data[5]
    if ei_class not in (1, 2) or ei_data not in (1, 2):
        raise StripError(f"{path}: unsupported ELF class/encoding")
    end = "<" if ei_data == 1 else ">"
    if ei_class == 2:  # 64-bit: sh_offset/sh_size live at 0x18/0x20
        e_shoff = struct.unpack_from(end + "Q", data, 0x28)[0]
        e_shentsize, e_shnum, e_shstrndx = struct.unpack_from(end + "HHH", data, 0x3A)
        off_offset, off_size, word = 0x18, 0x20, "Q"
    else:  # 32-bit: sh_offset/sh_size live at 0x10/0x14
        e_shoff = struct.unpack_from(end + "I", data, 0x20)[0]
        e_shentsize, e_shnum, e_shstrndx = struct.unpack_from(end + "HHH", data, 0x2E)
        off_offset, off_size, word = 0x10, 0x14, "I"
    if e_shoff == 0 or e_shnum == 0:
        return []

    def field(base, off, fmt):
        return struct.unpack_from(end + fmt, data, base + off)[0]

    headers = []
    for i in range(e_shnum):
        base = e_shoff + i * e_shentsize
        headers.append(
            (
                field(base, 0, "I"),  # sh_name
                field(base, 4, "I"),  # sh_type
                field(base, off_offset, word),
                field(base, off_size, word),
            )
        )
    str_off, str_size = headers[e_shstrndx][2], headers[e_shstrndx][3]
    strtab = data[str_off : str_off + str_size]

    sections = []
    for sh_name, sh_type, sh_offset, sh_size in headers:
        if sh_type == _SHT_NULL:
            continue
        name_end = strtab.find(b"\x00", sh_name)
        name = strtab[sh_name:name_end].decode("ascii", "replace")
        sections.append(Section(name, sh_type, sh_offset, sh_size))
    return sections


def section_bytes(path, name: str) -> bytes:
    """Raw content of one named section; the tests' byte-identity oracle."""
    data = Path(path).read_bytes()
    for s in elf_sections(path):
        if s.name == name:
            return data[s.offset : s.offset + s.size]
    raise StripError(f"{path}: no section {name!r}")


def has_debug_info(path) -> bool:
    return any(
        s.name.startswith((".debug_", ".zdebug_")) for s in elf_sections(path)
    )


def strip_binary(path, out=None) -> Path:
    """Write a symbol- and debug-free copy of `path`; returns the copy's path.

    Refuses input that already lacks debug info: silently "stripping" an
    already-stripped file would pair a view with the wrong ground truth.
    """
    path = Path(path)
    if not has_debug_info(path):
        raise StripError(f"{path}: no debug info (already stripped?)")
    out = Path(out) if out is not None else path.with_name(path.name + ".stripped")
    proc = subprocess.run(
        ["objcopy", "--strip-all", str(path), str(out)],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise StripError(
            f"objcopy failed ({proc.returncode}): {proc.stderr.strip()}"
        )
    if has_debug_info(out):
        raise StripError(f"{out}: debug sections survived stripping")
    return out


__all__ = [
    "StripError",
    "Section",
    "elf_sections",
    "section_bytes",
    "has_debug_info",
    "strip_binary",
]
