"""Minimal ELF64 section reader, just enough to pull DWARF debug sections.

Only little-endian ELF64 is supported (the fixture and target platform);
anything else is rejected with a clear error. SHF_COMPRESSED sections
(zlib, ELFCOMPRESS_ZLIB) are transparently decompressed.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

from ..errors import ParseError

ELF_MAGIC = b"\x7fELF"
ELFCLASS64 = 2
ELFDATA2LSB = 1
SHF_COMPRESSED = 0x800
ELFCOMPRESS_ZLIB = 1


@dataclass(frozen=True)
class Section:
    name: str
    data: bytes


class ElfFile:
    """Parsed section table of an ELF64 image."""

    def __init__(self, data: bytes):
        if len(data) < 64 or data[:4] != ELF_MAGIC:
            raise ParseError("not an ELF file")
        if data[4] != ELFCLASS64:
            raise ParseError("only ELF64 binaries are supported")
        if data[5] != ELFDATA2LSB:
            raise ParseError("only little-endian binaries are supported")
        self._data = data
        (e_shoff,) = struct.unpack_from("<Q", data, 0x28)
        e_shentsize, e_shnum, e_shstrndx = struct.unpack_from("<HHH", data, 0x3A)
        if e_shoff == 0 or e_shnum == 0:
            raise ParseError("ELF file has no section headers")
        headers = []
        for i in range(e_shnum):
            off = e_shoff + i * e_shentsize
            name_off, sh_type, sh_flags = struct.unpack_from("<IIQ", data, off)
            sh_offset, sh_size = struct.unpack_from("<QQ", data, off + 0x18)
            headers.append((name_off, sh_type, sh_flags, sh_offset, sh_size))
        strtab_off = headers[e_shstrndx][3]
        strtab_size = headers[e_shstrndx][4]
        strtab = data[strtab_off : strtab_off + strtab_size]

        self.sections: dict[str, Section] = {}
        for name_off, sh_type, sh_flags, sh_offset, sh_size in headers:
            end = strtab.find(b"\x00", name_off)
            name = strtab[name_off:end].decode("utf-8", "replace")
            if sh_type == 8:  # SHT_NOBITS
                continue
            raw = data[sh_offset : sh_offset + sh_size]
            if sh_flags & SHF_COMPRESSED:
                raw = _decompress(name, raw)
            self.sections[name] = Section(name, raw)

    def section(self, name: str) -> bytes | None:
        sec = self.sections.get(name)
        return sec.data if sec is not None else None


def _decompress(name: str, raw: bytes) -> bytes:
    if len(raw) < 24:
        raise ParseError(f"section {name}: truncated compression header")
    ch_type, _, ch_size, _ = struct.unpack_from("<IIQQ", raw, 0)
    if ch_type != ELFCOMPRESS_ZLIB:
        raise ParseError(f"section {name}: unsupported compression type {ch_type}")
    out = zlib.decompress(raw[24:])
    if len(out) != ch_size:
        raise ParseError(f"section {name}: decompressed size mismatch")
    return out
