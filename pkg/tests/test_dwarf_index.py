"""Ground-truth extraction from compiled binaries.

These tests run against the generated fixture binaries, so they check the
whole chain: ELF section loading, debug-info decoding for both encoding
versions the fixtures pin, type resolution, and the sidecar format.
"""

from __future__ import annotations

import pytest

from retyper.dwarf import DwarfIndex, index_binary
from retyper.dwarf.index import binary_id_of
from retyper.errors import NoDebugInfoError
from retyper.typelib import Pointer, Struct, render_type


def _entry(index, name):
    for fe in index.per_function.values():
        if fe.name == name:
            return fe
    raise AssertionError(f"{name} not indexed")


def _var(index, fn, name):
    fe = _entry(index, fn)
    for v in fe.variables:
        if v.name == name:
            return v
    raise AssertionError(f"{fn}: variable {name} not indexed")


def test_every_declared_variable_is_indexed(fixture_corpus, fixture_indices):
    for prog, pdata in fixture_corpus.manifest["programs"].items():
        index = fixture_indices[prog]
        for fn, finfo in pdata["functions"].items():
            fe = _entry(index, fn)
            missing = set(finfo["declared"]) - fe.var_names()
            assert not missing, f"{prog}/{fn}: missing {sorted(missing)}"


def test_invented_decompiler_names_are_never_in_debug_info(
    fixture_corpus, fixture_indices
):
    for prog, pdata in fixture_corpus.manifest["programs"].items():
        index = fixture_indices[prog]
        declared = index.declared_names
        for fn, finfo in pdata["functions"].items():
            for name in finfo["invented"]:
                assert name not in declared, f"{prog}/{fn}: {name}"


def test_recursive_struct_pointer_is_cut_exactly_once(fixture_indices):
    v = _var(fixture_indices["p01"], "list_sum", "head")
    assert render_type(v.type) == (
        "struct node { long int value@0; struct node * next@8; } *"
    )


def test_nested_struct_by_value(fixture_indices):
    v = _var(fixture_indices["p02"], "rect_area", "r")
    assert render_type(v.type) == (
        "struct rect"
        " { struct point { int x@0; int y@4; } lo@0;"
        " struct point { int x@0; int y@4; } hi@8; }"
    )


def test_union_members_all_at_offset_zero(fixture_indices):
    v = _var(fixture_indices["p03"], "blob_float", "b")
    assert render_type(v.type) == (
        "union blob { unsigned int word@0; unsigned char[4] raw@0;"
        " float real@0; } *"
    )


def test_enum_parameter(fixture_indices):
    v = _var(fixture_indices["p03"], "color_name", "c")
    assert render_type(v.type) == "enum color"


def test_typedef_resolves_to_underlying_type_but_keeps_the_name(fixture_indices):
    v = _var(fixture_indices["p04"], "word_mix", "w")
    assert render_type(v.type) == "long unsigned int"
    assert v.typedef_name == "word_t"


def test_const_qualifier_resolved_away(fixture_indices):
    v = _var(fixture_indices["p01"], "block_crc", "data")
    assert render_type(v.type) == "unsigned char *"


def test_two_dimensional_array_renders_inner_extent_first(fixture_indices):
    v = _var(fixture_indices["p05"], "grid_trace", "grid")
    assert render_type(v.type) == "int[5][4]"
    g = _var(fixture_indices["p05"], "grid_trace", "g")
    assert render_type(g.type) == "int[5] *"


def test_function_pointer_parameter(fixture_indices):
    v = _var(fixture_indices["p06"], "apply_cb", "fn")
    assert render_type(v.type) == "int (int, char *) *"


def test_char_array_local(fixture_indices):
    v = _var(fixture_indices["p06"], "apply_cb", "buf")
    assert render_type(v.type) == "char[32]"


def test_struct_member_with_embedded_array(fixture_indices):
    # a nested composite expands in place; only true cycles get cut
    v = _var(fixture_indices["p08"], "table_find", "t")
    assert render_type(v.type) == (
        "struct table { char[12] name@0;"
        " struct node { long int value@0; struct node * next@8; } * head@16;"
        " unsigned int mask@24; } *"
    )


def test_pointer_to_pointer(fixture_indices):
    v = _var(fixture_indices["p07"], "node_push", "slot")
    assert isinstance(v.type, Pointer)
    assert isinstance(v.type.target, Pointer)
    assert isinstance(v.type.target.target, Struct)


def test_block_scoped_variables_are_flattened_into_the_function(fixture_indices):
    # `j` lives in a lexical block inside the outer loop
    fe = _entry(fixture_indices["p05"], "grid_trace")
    assert "j" in fe.var_names()
    assert _var(fixture_indices["p05"], "grid_trace", "j").kind == "local"


def test_parameters_and_locals_are_distinguished(fixture_indices):
    assert _var(fixture_indices["p01"], "block_crc", "len").kind == "parameter"
    assert _var(fixture_indices["p01"], "block_crc", "crc").kind == "local"


def test_globals_are_indexed_with_their_types(fixture_indices):
    index = fixture_indices["p01"]
    assert render_type(index.globals["g_total"].type) == "long int"
    assert render_type(index.globals["g_seed"].type) == "unsigned int"
    assert render_type(index.globals["g_ratio"].type) == "double"
    assert render_type(index.globals["g_tag"].type) == "char[12]"
    assert render_type(index.globals["g_hook"].type) == "int (int) *"


def test_lookup_falls_back_to_globals(fixture_indices):
    index = fixture_indices["p06"]
    fe = _entry(index, "alias_mix")
    ty = index.lookup(fe.function_id, "g_seed")
    assert ty is not None and render_type(ty) == "unsigned int"
    assert index.lookup(fe.function_id, "uVar999") is None


def test_lookup_prefers_function_scope_over_globals(fixture_indices):
    # every function-scoped hit must come from that function's variables
    index = fixture_indices["p01"]
    fe = _entry(index, "block_crc")
    assert render_type(index.lookup(fe.function_id, "crc")) == "unsigned int"


def test_resolve_function_accepts_plain_name_when_unique(fixture_indices):
    index = fixture_indices["p01"]
    fe = index.resolve_function("block_crc@0x0")
    assert fe is not None and fe.name == "block_crc"


def test_both_debug_encoding_versions_agree(fixture_corpus, fixture_indices):
    # p05/p11 pin the older encoding; same extraction rules must apply
    versions = {
        p["dwarf_version"] for p in fixture_corpus.manifest["programs"].values()
    }
    assert versions == {4, 5}
    for prog in ("p05", "p11"):
        pdata = fixture_corpus.program(prog)
        index = fixture_indices[prog]
        for fn, finfo in pdata["functions"].items():
            fe = _entry(index, fn)
            assert set(finfo["declared"]) <= fe.var_names()


def test_stripped_binary_raises_no_debug_info(fixture_corpus):
    with pytest.raises(NoDebugInfoError):
        index_binary(fixture_corpus.stripped_dir / "p01")


def test_binary_id_is_file_content_hash(fixture_corpus, fixture_indices):
    path = fixture_corpus.binary("p01")
    assert fixture_indices["p01"].binary_id == binary_id_of(path)
    assert len(fixture_indices["p01"].binary_id) == 64


def test_sidecar_round_trip_preserves_everything(tmp_path, fixture_indices):
    index = fixture_indices["p06"]
    path = index.save(tmp_path)
    loaded = DwarfIndex.load(path)
    assert loaded.binary_id == index.binary_id
    assert loaded.pointer_size == index.pointer_size
    assert set(loaded.per_function) == set(index.per_function)
    for fid, fe in index.per_function.items():
        got = loaded.per_function[fid]
        assert got.entry == fe.entry
        assert [
            (v.name, render_type(v.type), v.kind, v.typedef_name)
            for v in got.variables
        ] == [
            (v.name, render_type(v.type), v.kind, v.typedef_name)
            for v in fe.variables
        ]
    assert set(loaded.globals) == set(index.globals)


def test_sidecar_bytes_are_deterministic(tmp_path, fixture_indices):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    a = fixture_indices["p03"].save(tmp_path / "a")
    b = fixture_indices["p03"].save(tmp_path / "b")
    assert a.read_bytes() == b.read_bytes()
