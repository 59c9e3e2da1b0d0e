"""Stripping removes symbols and debug info but not a byte of content."""

import hashlib
import shutil
import subprocess

import pytest

from ghidra_export.stripper import (
    StripError,
    elf_sections,
    has_debug_info,
    section_bytes,
    strip_binary,
)

SOURCE = """
static int scale(int x) { return 3 * x + 1; }
int series_sum(int n) {
    int total = 0;
    for (int i = 0; i < n; i++) total += scale(i);
    return total;
}
int main(void) { return series_sum(10) & 0xff; }
"""


@pytest.fixture(scope="module")
def debug_binary(tmp_path_factory):
    if shutil.which("gcc") is None or shutil.which("objcopy") is None:
        pytest.skip("gcc/objcopy not available")
    d = tmp_path_factory.mktemp("strip")
    src = d / "prog.c"
    src.write_text(SOURCE)
    out = d / "prog"
    subprocess.run(
        ["gcc", "-g", "-O0", "-o", str(out), str(src)],
        check=True,
        capture_output=True,
    )
    return out


def test_debug_binary_detected_and_sections_listed(debug_binary):
    assert has_debug_info(debug_binary)
    names = {s.name for s in elf_sections(debug_binary)}
    assert ".debug_info" in names and ".text" in names and ".symtab" in names


def test_strip_removes_debug_and_symbols_only(debug_binary, tmp_path):
    out = strip_binary(debug_binary, tmp_path / "prog.stripped")
    assert not has_debug_info(out)
    stripped_names = {s.name for s in elf_sections(out)}
    assert not any(n.startswith(".debug_") for n in stripped_names)
    assert ".symtab" not in stripped_names

    # independent content oracle: allocated sections byte-identical
    for section in (".text", ".data", ".rodata"):
        if not any(s.name == section for s in elf_sections(debug_binary)):
            continue
        before = hashlib.sha256(section_bytes(debug_binary, section)).hexdigest()
        after = hashlib.sha256(section_bytes(out, section)).hexdigest()
        assert before == after, f"{section} changed during stripping"


def test_already_stripped_input_is_an_error(debug_binary, tmp_path):
    out = strip_binary(debug_binary, tmp_path / "once")
    with pytest.raises(StripError, match="already stripped"):
        strip_binary(out, tmp_path / "twice")


def test_non_elf_input_is_an_error(tmp_path):
    bogus = tmp_path / "notelf"
    bogus.write_bytes(b"MZ\x90\x00 definitely not ELF")
    with pytest.raises(StripError, match="not an ELF"):
        strip_binary(bogus)


def test_default_output_path_is_a_sibling(debug_binary):
    out = strip_binary(debug_binary)
    try:
        assert out == debug_binary.with_name(debug_binary.name + ".stripped")
        assert out.exists()
    finally:
        out.unlink()
