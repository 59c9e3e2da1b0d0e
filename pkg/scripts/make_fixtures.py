#!/usr/bin/env python3
"""Build the compiled fixture corpus used by the test suite and demos.

One declarative table drives everything: for each program we emit a real C
source file, compile it with debug info (a couple of binaries pinned to DWARF
v4 so both encodings stay covered), produce a stripped twin, and record
decompiler-style export files for both views.  The recorded pseudo-C is not
the compiled C — like a real decompiler it paraphrases — but variable names,
storage, and entry addresses line up with the binary, so ground-truth lookups
against the debug info behave exactly as they would on real exports.

Everything is deterministic: recorded code depends only on the function's own
declaration (shared helpers recorded from different binaries come out token
for token identical), storage assignment is positional, and invented
decompiler temporaries use fixed counters.  Rebuilding produces identical
exports for identical sources.

Layout under --out:
    src/pNN.c          generated C source
    bin/pNN            compiled with -O0 -g
    stripped/pNN       stripped twin (no debug info)
    exports/pNN.debug.jsonl, pNN.stripped.jsonl
    fixtures.json      manifest: per-function var provenance for test oracles
"""

from __future__ import annotations

import argparse
import json
import re
import subprocess
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from retyper.dwarf import index_binary
from retyper.ingest import parse_export_record
from retyper.typelib import render_type, type_from_obj

# ---------------------------------------------------------------------------
# decompiler-flavoured type objects (interchange `type` schema)

def prim(name: str, size: int) -> dict:
    return {"kind": "primitive", "name": name, "size": size}


def ptr(target: dict) -> dict:
    return {"kind": "pointer", "target": target}


def arr(element: dict, count: int) -> dict:
    return {"kind": "array", "element": element, "count": count}


def istruct(tag: str) -> dict:
    return {"kind": "struct", "tag": tag, "size": 0, "incomplete": True, "fields": []}


def iunion(tag: str) -> dict:
    return {"kind": "union", "tag": tag, "size": 0, "incomplete": True, "members": []}


T_INT = prim("int", 4)
T_UINT = prim("uint", 4)
T_CHAR = prim("char", 1)
T_UCHAR = prim("uchar", 1)
T_SHORT = prim("short", 2)
T_USHORT = prim("ushort", 2)
T_LONG = prim("long", 8)
T_ULONG = prim("ulong", 8)
T_FLOAT = prim("float", 4)
T_DOUBLE = prim("double", 8)
T_U4 = prim("undefined4", 4)
T_PCHAR = ptr(T_CHAR)
T_ENUM_COLOR = {"kind": "enum", "tag": "color", "size": 4}
T_CODE = ptr({"kind": "function", "return": T_INT, "params": [T_INT, T_PCHAR]})

# ---------------------------------------------------------------------------
# program table model

@dataclass
class V:
    """One recorded variable: declared C local/param or invented temporary."""

    name: str
    ty: dict
    size: int
    cdecl: str | None = None  # C declarator with {n}; None for invented vars


@dataclass
class Fn:
    name: str
    ret_c: str
    ret_ty: dict
    params: list[V]
    locs: list[V]
    c_body: str
    pseudo: list[str]
    aliases: list[V] = field(default_factory=list)  # invented, both views
    extras: list[V] = field(default_factory=list)  # invented, stripped only
    rams: list[tuple[V, int]] = field(default_factory=list)  # (var, address)
    status: str = "ok"
    empty_code: bool = False
    ambiguous: bool = False  # stripped view: duplicate a storage key
    shared: bool = False


@dataclass
class Program:
    name: str
    fns: list[Fn]
    dwarf_version: int = 5


PRELUDE = """\
struct node { long value; struct node *next; };
struct point { int x; int y; };
struct rect { struct point lo; struct point hi; };
union blob { unsigned int word; unsigned char raw[4]; float real; };
enum color { RED, GREEN, BLUE, VIOLET };
typedef unsigned long word_t;
struct table { char name[12]; struct node *head; unsigned int mask; };

long g_total = 7;
unsigned int g_seed = 2654435769u;
double g_ratio = 0.618;
char g_tag[12] = "fixture";
int (*g_hook)(int) = 0;
"""

GLOBAL_ADDRS = {
    "g_total": 0x404040,
    "g_seed": 0x404014,
    "g_ratio": 0x404020,
    "g_tag": 0x404028,
    "g_hook": 0x404038,
}

# ---------------------------------------------------------------------------
# hand-written functions

def fn_block_crc() -> Fn:
    return Fn(
        name="block_crc",
        ret_c="unsigned int",
        ret_ty=T_UINT,
        params=[
            V("data", ptr(T_UCHAR), 8, "const unsigned char *{n}"),
            V("len", T_INT, 4, "int {n}"),
        ],
        locs=[V("crc", T_UINT, 4, "unsigned int {n}"), V("i", T_INT, 4, "int {n}")],
        c_body="""\
    crc = 5381u;
    for (i = 0; i < len; i++) {
        crc = (crc << 3) ^ data[i] ^ (unsigned int)i;
    }
    return crc;""",
        pseudo=[
            "$crc$ = 0x1505;",
            "for ($i$ = 0; $i$ < $len$; $i$ = $i$ + 1) {",
            "  $crc$ = ($crc$ << 3 ^ (uint)*$data$) ^ $i$;",
            "  $data$ = $data$ + 1;",
            "}",
            "return $crc$;",
        ],
        shared=True,
    )


def fn_list_sum(alias: V) -> Fn:
    return Fn(
        name="list_sum",
        ret_c="long",
        ret_ty=T_LONG,
        params=[V("head", ptr(istruct("node")), 8, "struct node *{n}")],
        locs=[
            V("total", T_LONG, 8, "long {n}"),
            V("cur", ptr(istruct("node")), 8, "struct node *{n}"),
        ],
        c_body="""\
    total = 0;
    for (cur = head; cur; cur = cur->next) {
        total += cur->value;
    }
    return total;""",
        pseudo=[
            "$total$ = 0;",
            "for ($cur$ = $head$; $cur$ != (struct node *)0x0; $cur$ = $cur$->next) {",
            "  $total$ = $total$ + $cur$->value;",
            "}",
            f"${alias.name}$ = $total$ != 0;",
            "return $total$;",
        ],
        aliases=[alias],
    )


def fn_rect_area() -> Fn:
    return Fn(
        name="rect_area",
        ret_c="int",
        ret_ty=T_INT,
        params=[V("r", istruct("rect"), 16, "struct rect {n}")],
        locs=[V("w", T_INT, 4, "int {n}"), V("h", T_INT, 4, "int {n}")],
        c_body="""\
    w = r.hi.x - r.lo.x;
    h = r.hi.y - r.lo.y;
    return w * h;""",
        pseudo=[
            "$w$ = $r$.hi.x - $r$.lo.x;",
            "$h$ = $r$.hi.y - $r$.lo.y;",
            "return $w$ * $h$;",
        ],
    )


def fn_mid_point() -> Fn:
    return Fn(
        name="mid_point",
        ret_c="struct point",
        ret_ty=istruct("point"),
        params=[
            V("a", istruct("point"), 8, "struct point {n}"),
            V("b", istruct("point"), 8, "struct point {n}"),
        ],
        locs=[V("m", istruct("point"), 8, "struct point {n}")],
        c_body="""\
    m.x = (a.x + b.x) / 2;
    m.y = (a.y + b.y) / 2;
    return m;""",
        pseudo=[
            "$m$.x = ($a$.x + $b$.x) / 2;",
            "$m$.y = ($a$.y + $b$.y) / 2;",
            "return $m$;",
        ],
    )


def fn_blob_float(alias: V) -> Fn:
    return Fn(
        name="blob_float",
        ret_c="float",
        ret_ty=T_FLOAT,
        params=[
            V("b", ptr(iunion("blob")), 8, "union blob *{n}"),
            V("w", T_UINT, 4, "unsigned int {n}"),
        ],
        locs=[V("out", T_FLOAT, 4, "float {n}")],
        c_body="""\
    b->word = w ^ 16843009u;
    out = b->real;
    return out;""",
        pseudo=[
            "$b$->word = $w$ ^ 0x1010101;",
            f"${alias.name}$ = $w$ >> 8;",
            "$out$ = $b$->real;",
            "return $out$;",
        ],
        aliases=[alias],
    )


def fn_color_name() -> Fn:
    return Fn(
        name="color_name",
        ret_c="const char *",
        ret_ty=T_PCHAR,
        params=[V("c", T_ENUM_COLOR, 4, "enum color {n}")],
        locs=[V("s", T_PCHAR, 8, "const char *{n}")],
        c_body="""\
    s = "gray";
    if (c == RED) s = "red";
    else if (c == GREEN) s = "green";
    else if (c == BLUE) s = "blue";
    return s;""",
        pseudo=[
            '$s$ = "gray";',
            "if ($c$ == 0) {",
            '  $s$ = "red";',
            "}",
            "else if ($c$ == 1) {",
            '  $s$ = "green";',
            "}",
            "else if ($c$ == 2) {",
            '  $s$ = "blue";',
            "}",
            "return $s$;",
        ],
    )


def fn_vec_scale(alias: V) -> Fn:
    return Fn(
        name="vec_scale",
        ret_c="void",
        ret_ty={"kind": "void"},
        params=[
            V("v", ptr(T_DOUBLE), 8, "double *{n}"),
            V("n", T_INT, 4, "int {n}"),
            V("k", T_DOUBLE, 8, "double {n}"),
        ],
        locs=[V("j", T_INT, 4, "int {n}")],
        c_body="""\
    for (j = 0; j < n; j++) {
        v[j] *= k;
    }""",
        pseudo=[
            "for ($j$ = 0; $j$ < $n$; $j$ = $j$ + 1) {",
            "  $v$[$j$] = $v$[$j$] * $k$;",
            "}",
            f"${alias.name}$ = $n$ * 8;",
            "return;",
        ],
        aliases=[alias],
    )


def fn_word_mix() -> Fn:
    return Fn(
        name="word_mix",
        ret_c="word_t",
        ret_ty=T_ULONG,
        params=[V("w", T_ULONG, 8, "word_t {n}"), V("s", T_INT, 4, "int {n}")],
        locs=[V("m", T_ULONG, 8, "word_t {n}")],
        c_body="""\
    m = (w >> (s & 63)) | (w << (64 - (s & 63)));
    m ^= g_seed;
    return m;""",
        pseudo=[
            "$m$ = $w$ >> ($s$ & 0x3f) | $w$ << (0x40 - ($s$ & 0x3f) & 0x3f);",
            "$m$ = $m$ ^ (ulong)@g_seed@;",
            "return $m$;",
        ],
    )


def fn_str_copy(alias: V) -> Fn:
    return Fn(
        name="str_copy",
        ret_c="unsigned long",
        ret_ty=T_ULONG,
        params=[
            V("dst", T_PCHAR, 8, "char *{n}"),
            V("src", T_PCHAR, 8, "const char *{n}"),
            V("cap", T_ULONG, 8, "unsigned long {n}"),
        ],
        locs=[V("n", T_ULONG, 8, "unsigned long {n}")],
        c_body="""\
    n = 0;
    while (n + 1 < cap && src[n]) {
        dst[n] = src[n];
        n++;
    }
    dst[n] = 0;
    return n;""",
        pseudo=[
            "$n$ = 0;",
            "while (($n$ + 1 < $cap$) && ($src$[$n$] != '\\0')) {",
            "  $dst$[$n$] = $src$[$n$];",
            "  $n$ = $n$ + 1;",
            "}",
            f"${alias.name}$ = (int)$n$;",
            "$dst$[$n$] = '\\0';",
            "return $n$;",
        ],
        aliases=[alias],
    )


def fn_grid_trace() -> Fn:
    return Fn(
        name="grid_trace",
        ret_c="int",
        ret_ty=T_INT,
        params=[V("g", ptr(arr(T_INT, 5)), 8, "int (*{n})[5]")],
        locs=[
            V("grid", arr(arr(T_INT, 5), 4), 80, "int {n}[4][5]"),
            V("i", T_INT, 4, "int {n}"),
            V("acc", T_INT, 4, "int {n}"),
        ],
        c_body="""\
    for (i = 0; i < 4; i++) {
        int j;
        for (j = 0; j < 5; j++) {
            grid[i][j] = g[i][j] + i;
        }
    }
    acc = 0;
    for (i = 0; i < 4; i++) {
        acc += grid[i][i];
    }
    return acc;""",
        pseudo=[
            "for ($i$ = 0; $i$ < 4; $i$ = $i$ + 1) {",
            "  $grid$[$i$][0] = (*$g$)[0] + $i$;",
            "}",
            "$acc$ = 0;",
            "for ($i$ = 0; $i$ < 4; $i$ = $i$ + 1) {",
            "  $acc$ = $acc$ + $grid$[$i$][$i$];",
            "}",
            "return $acc$;",
        ],
    )


def fn_apply_cb() -> Fn:
    return Fn(
        name="apply_cb",
        ret_c="int",
        ret_ty=T_INT,
        params=[
            V("fn", T_CODE, 8, "int (*{n})(int, char *)"),
            V("seed", T_INT, 4, "int {n}"),
        ],
        locs=[
            V("buf", arr(T_CHAR, 32), 32, "char {n}[32]"),
            V("rc", T_INT, 4, "int {n}"),
        ],
        c_body="""\
    buf[0] = 'x';
    buf[1] = 0;
    rc = seed * 2;
    if (fn) {
        rc = fn(seed, buf);
    }
    return rc;""",
        pseudo=[
            "$buf$[0] = 'x';",
            "$buf$[1] = '\\0';",
            "$rc$ = $seed$ * 2;",
            "if ($fn$ != (code *)0x0) {",
            "  $rc$ = (*$fn$)($seed$, $buf$);",
            "}",
            "return $rc$;",
        ],
    )


def fn_alias_mix() -> Fn:
    stack_piece = V("iStack_28", T_INT, 4)
    g_seed_var = V("g_seed", T_UINT, 4)
    return Fn(
        name="alias_mix",
        ret_c="unsigned int",
        ret_ty=T_UINT,
        params=[V("key", T_UINT, 4, "unsigned int {n}")],
        locs=[
            V("acc", T_UINT, 4, "unsigned int {n}"),
            V("tmp", T_USHORT, 2, "unsigned short {n}"),
        ],
        c_body="""\
    acc = key * 2654435761u;
    tmp = (unsigned short)(acc >> 16);
    acc ^= tmp ^ g_seed;
    return acc;""",
        pseudo=[
            "$acc$ = $key$ * -0x61c8864f;",
            "$tmp$ = (ushort)($acc$ >> 0x10);",
            "$iStack_28$ = (int)($acc$ & 1);",
            "$acc$ = $acc$ ^ (uint)$tmp$ ^ $g_seed$;",
            "return $acc$ + $iStack_28$;",
        ],
        aliases=[stack_piece],
        extras=[V("", T_U4, 4)],
        rams=[(g_seed_var, GLOBAL_ADDRS["g_seed"])],
    )


def fn_node_push() -> Fn:
    return Fn(
        name="node_push",
        ret_c="void",
        ret_ty={"kind": "void"},
        params=[
            V("slot", ptr(ptr(istruct("node"))), 8, "struct node **{n}"),
            V("n", ptr(istruct("node")), 8, "struct node *{n}"),
        ],
        locs=[],
        c_body="""\
    n->next = *slot;
    *slot = n;
    g_total++;""",
        pseudo=[
            "$n$->next = *$slot$;",
            "*$slot$ = $n$;",
            "@g_total@ = @g_total@ + 1;",
            "return;",
        ],
    )


def fn_table_find(alias: V) -> Fn:
    return Fn(
        name="table_find",
        ret_c="struct node *",
        ret_ty=ptr(istruct("node")),
        params=[
            V("t", ptr(istruct("table")), 8, "struct table *{n}"),
            V("key", T_PCHAR, 8, "const char *{n}"),
        ],
        locs=[
            V("cur", ptr(istruct("node")), 8, "struct node *{n}"),
            V("i", T_INT, 4, "int {n}"),
        ],
        c_body="""\
    if (!key) {
        return 0;
    }
    cur = t->head;
    for (i = 0; cur && i < (int)t->mask; i++) {
        cur = cur->next;
    }
    return cur;""",
        pseudo=[
            "if ($key$ == (char *)0x0) {",
            "  return (struct node *)0x0;",
            "}",
            "$cur$ = $t$->head;",
            f"${alias.name}$ = $t$->mask;",
            "for ($i$ = 0; ($cur$ != (struct node *)0x0 && ($i$ < (int)$t$->mask)); $i$ = $i$ + 1) {",
            "  $cur$ = $cur$->next;",
            "}",
            "return $cur$;",
        ],
        aliases=[alias],
    )


def fn_checksum16(alias: V) -> Fn:
    return Fn(
        name="checksum16",
        ret_c="unsigned short",
        ret_ty=T_USHORT,
        params=[
            V("p", ptr(T_UCHAR), 8, "const unsigned char *{n}"),
            V("n", T_ULONG, 8, "unsigned long {n}"),
        ],
        locs=[
            V("sum", T_UINT, 4, "unsigned int {n}"),
            V("i", T_ULONG, 8, "unsigned long {n}"),
        ],
        c_body="""\
    sum = 0;
    for (i = 0; i < n; i++) {
        sum += p[i];
    }
    sum = (sum & 0xffff) + (sum >> 16);
    return (unsigned short)sum;""",
        pseudo=[
            "$sum$ = 0;",
            "for ($i$ = 0; $i$ < $n$; $i$ = $i$ + 1) {",
            "  $sum$ = $sum$ + (uint)$p$[$i$];",
            "}",
            f"${alias.name}$ = $sum$ >> 0x10;",
            "$sum$ = ($sum$ & 0xffff) + ($sum$ >> 0x10);",
            "return (ushort)$sum$;",
        ],
        aliases=[alias],
    )


def fn_clampf() -> Fn:
    return Fn(
        name="clampf",
        ret_c="float",
        ret_ty=T_FLOAT,
        params=[
            V("x", T_FLOAT, 4, "float {n}"),
            V("lo", T_FLOAT, 4, "float {n}"),
            V("hi", T_FLOAT, 4, "float {n}"),
        ],
        locs=[V("r", T_FLOAT, 4, "float {n}")],
        c_body="""\
    r = x;
    if (r < lo) r = lo;
    if (r > hi) r = hi;
    return r;""",
        pseudo=[
            "$r$ = $x$;",
            "if ($r$ < $lo$) {",
            "  $r$ = $lo$;",
            "}",
            "if ($hi$ < $r$) {",
            "  $r$ = $hi$;",
            "}",
            "return $r$;",
        ],
    )


def fn_bit_reverse(alias: V) -> Fn:
    return Fn(
        name="bit_reverse",
        ret_c="unsigned long",
        ret_ty=T_ULONG,
        params=[V("v", T_ULONG, 8, "unsigned long {n}")],
        locs=[
            V("r", T_ULONG, 8, "unsigned long {n}"),
            V("b", T_INT, 4, "int {n}"),
        ],
        c_body="""\
    r = 0;
    for (b = 0; b < 64; b++) {
        r = (r << 1) | ((v >> b) & 1ul);
    }
    return r;""",
        pseudo=[
            "$r$ = 0;",
            "for ($b$ = 0; $b$ < 0x40; $b$ = $b$ + 1) {",
            "  $r$ = $r$ << 1 | $v$ >> ($b$ & 0x3f) & 1;",
            "}",
            f"${alias.name}$ = (int)$r$;",
            "return $r$;",
        ],
        aliases=[alias],
    )


def fn_twin_stack() -> Fn:
    return Fn(
        name="twin_stack",
        ret_c="int",
        ret_ty=T_INT,
        params=[V("a", T_INT, 4, "int {n}")],
        locs=[V("lo", T_INT, 4, "int {n}"), V("hi", T_INT, 4, "int {n}")],
        c_body="""\
    lo = a & 0xffff;
    hi = a >> 16;
    return hi - lo;""",
        pseudo=[
            "$lo$ = $a$ & 0xffff;",
            "$hi$ = $a$ >> 0x10;",
            "return $hi$ - $lo$;",
        ],
        ambiguous=True,
    )


def fn_counter_bump() -> Fn:
    return Fn(
        name="counter_bump",
        ret_c="void",
        ret_ty={"kind": "void"},
        params=[],
        locs=[],
        c_body="    g_total++;",
        pseudo=["@g_total@ = @g_total@ + 1;", "return;"],
    )


def fn_thunk_exit() -> Fn:
    return Fn(
        name="thunk_exit",
        ret_c="void",
        ret_ty={"kind": "void"},
        params=[],
        locs=[],
        c_body="",
        pseudo=[],
        empty_code=True,
    )


def fn_big_search() -> Fn:
    return Fn(
        name="big_search",
        ret_c="int",
        ret_ty=T_INT,
        params=[V("limit", T_INT, 4, "int {n}")],
        locs=[V("i", T_INT, 4, "int {n}"), V("hits", T_INT, 4, "int {n}")],
        c_body="""\
    hits = 0;
    for (i = 0; i < limit; i++) {
        if ((i * 2654435761u >> 24) == 17) {
            hits++;
        }
    }
    return hits;""",
        pseudo=[],
        status="timeout",
    )


def fn_broken_parse() -> Fn:
    return Fn(
        name="broken_parse",
        ret_c="int",
        ret_ty=T_INT,
        params=[V("raw", T_PCHAR, 8, "const char *{n}")],
        locs=[],
        c_body="    return raw ? raw[0] : -1;",
        pseudo=[],
        status="failed",
    )


# ---------------------------------------------------------------------------
# filler templates: same shapes, distinct literals so bodies never collide

def mk_alias(slot: int) -> V:
    return V(f"uVar{90 + slot}", T_U4, 4)


def filler_acc(fid: int, alias: bool) -> Fn:
    k = 3 + fid * 7
    al = [mk_alias(1), V("uStack_34", T_U4, 4)] if alias else []
    pseudo = [
        "$acc$ = 0;",
        "for ($i$ = 0; $i$ < $n$; $i$ = $i$ + 1) {",
        f"  $acc$ = $acc$ + $i$ * {k:#x};",
        "}",
    ]
    if alias:
        pseudo.append(f"$uVar91$ = $acc$ ^ {k * 3 + 1:#x};")
        pseudo.append("$uStack_34$ = $uVar91$ >> 1;")
    pseudo.append("return $acc$;")
    return Fn(
        name=f"acc_scan_{fid}",
        ret_c="int",
        ret_ty=T_INT,
        params=[V("n", T_INT, 4, "int {n}")],
        locs=[V("i", T_INT, 4, "int {n}"), V("acc", T_INT, 4, "int {n}")],
        c_body=f"""\
    acc = 0;
    for (i = 0; i < n; i++) {{
        acc = acc + i * {k};
    }}
    return acc;""",
        pseudo=pseudo,
        aliases=al,
    )


def filler_mask(fid: int, alias: bool) -> Fn:
    k = 11 + fid * 13
    j = 0x5BD1 ^ fid
    al = [mk_alias(2)] if alias else []
    pseudo = [f"$m$ = $x$ >> 3 ^ $x$ * {k:#x};"]
    if alias:
        pseudo.append(f"$uVar92$ = $m$ & {j:#x};")
    pseudo.append(f"return $m$ ^ {j:#x};")
    return Fn(
        name=f"mask_mix_{fid}",
        ret_c="unsigned int",
        ret_ty=T_UINT,
        params=[V("x", T_UINT, 4, "unsigned int {n}")],
        locs=[V("m", T_UINT, 4, "unsigned int {n}")],
        c_body=f"""\
    m = (x >> 3) ^ (x * {k}u);
    return m ^ {j}u;""",
        pseudo=pseudo,
        aliases=al,
    )


def filler_gap(fid: int, alias: bool) -> Fn:
    k = 5 + fid * 3
    al = [mk_alias(3), V("lStack_40", prim("undefined8", 8), 8)] if alias else []
    pseudo = [
        "if ($a$ < $b$) {",
        f"  $t$ = ($b$ - $a$) + {k};",
        "}",
        "else {",
        "  $t$ = $a$ - $b$;",
        "}",
    ]
    if alias:
        pseudo.append(f"$uVar93$ = (int)$t$ + {k * 2:#x};")
        pseudo.append("$lStack_40$ = $t$;")
    pseudo.append("return $t$ * 3;")
    return Fn(
        name=f"gap_pick_{fid}",
        ret_c="long",
        ret_ty=T_LONG,
        params=[V("a", T_LONG, 8, "long {n}"), V("b", T_LONG, 8, "long {n}")],
        locs=[V("t", T_LONG, 8, "long {n}")],
        c_body=f"""\
    if (a < b) {{
        t = b - a + {k};
    }} else {{
        t = a - b;
    }}
    return t * 3;""",
        pseudo=pseudo,
        aliases=al,
    )


def filler_walk(fid: int, alias: bool) -> Fn:
    k = 2 + fid
    al = [mk_alias(4), V("pcStack_50", ptr(T_CHAR), 8)] if alias else []
    pseudo = [
        "$q$ = $p$;",
        f"while ({k} < $n$) {{",
        "  $q$ = $q$ + 1;",
        "  $n$ = $n$ + -1;",
        "}",
        "$c$ = *$q$;",
        "if ($c$ == 'z') {",
        "  $q$ = $p$;",
        "}",
    ]
    if alias:
        pseudo.append(f"$uVar94$ = (int)$c$ * {k:#x};")
        pseudo.append("$pcStack_50$ = $q$ + 1;")
    pseudo.append("return $q$;")
    return Fn(
        name=f"tail_walk_{fid}",
        ret_c="char *",
        ret_ty=T_PCHAR,
        params=[V("p", T_PCHAR, 8, "char *{n}"), V("n", T_INT, 4, "int {n}")],
        locs=[V("q", T_PCHAR, 8, "char *{n}"), V("c", T_CHAR, 1, "char {n}")],
        c_body=f"""\
    q = p;
    while (n > {k}) {{
        q = q + 1;
        n = n - 1;
    }}
    c = *q;
    if (c == 'z') {{
        q = p;
    }}
    return q;""",
        pseudo=pseudo,
        aliases=al,
    )


def filler_lerp(fid: int, alias: bool) -> Fn:
    k = fid * 2 + 1
    al = [mk_alias(5)] if alias else []
    pseudo = [f"$y$ = $x$ * {k}.5 + @g_ratio@;"]
    if alias:
        pseudo.append(f"$uVar95$ = {k * 5:#x};")
    pseudo.append("return $y$;")
    return Fn(
        name=f"lerp_step_{fid}",
        ret_c="double",
        ret_ty=T_DOUBLE,
        params=[V("x", T_DOUBLE, 8, "double {n}")],
        locs=[V("y", T_DOUBLE, 8, "double {n}")],
        c_body=f"""\
    y = x * {k}.5 + g_ratio;
    return y;""",
        pseudo=pseudo,
        aliases=al,
    )


def filler_fold(fid: int, alias: bool) -> Fn:
    k = 4 + fid * 5
    al = [mk_alias(6)] if alias else []
    extras = [V("", T_U4, 4)] if fid % 7 == 3 else []
    pseudo = [f"$r$ = (short)((int)$v$ + (uint)$b$ * {k:#x});"]
    if alias:
        pseudo.append(f"$uVar96$ = (int)$r$ & {k + 1:#x};")
    pseudo.append("return $r$;")
    return Fn(
        name=f"fold_short_{fid}",
        ret_c="short",
        ret_ty=T_SHORT,
        params=[
            V("v", T_SHORT, 2, "short {n}"),
            V("b", T_UCHAR, 1, "unsigned char {n}"),
        ],
        locs=[V("r", T_SHORT, 2, "short {n}")],
        c_body=f"""\
    r = (short)(v + b * {k});
    return r;""",
        pseudo=pseudo,
        aliases=al,
        extras=extras,
    )


# ---------------------------------------------------------------------------
# the corpus table

def build_programs() -> list[Program]:
    a = mk_alias  # noqa: F841  (template aliases come from the fillers)
    progs = [
        Program("p01", [fn_block_crc(), fn_list_sum(mk_alias(1)), filler_acc(1, True), filler_mask(1, False)]),
        Program("p02", [fn_block_crc(), fn_rect_area(), fn_mid_point(), filler_gap(2, True)]),
        Program("p03", [fn_block_crc(), fn_blob_float(mk_alias(2)), fn_color_name(), filler_walk(3, True)]),
        Program("p04", [fn_block_crc(), fn_vec_scale(mk_alias(3)), fn_word_mix(), filler_lerp(4, True)]),
        Program("p05", [fn_str_copy(mk_alias(4)), fn_grid_trace(), filler_fold(5, True)], dwarf_version=4),
        Program("p06", [fn_apply_cb(), fn_alias_mix(), filler_acc(6, True)]),
        Program("p07", [fn_node_push(), filler_mask(7, True), filler_lerp(7, True)]),
        Program("p08", [fn_table_find(mk_alias(5)), filler_gap(8, True), filler_fold(8, True)]),
        Program("p09", [filler_acc(9, True), filler_mask(9, True), filler_walk(9, True)]),
        Program("p10", [filler_lerp(10, True), filler_fold(10, True), filler_gap(10, True)]),
        Program("p11", [fn_checksum16(mk_alias(6)), filler_acc(11, True), filler_lerp(11, True)], dwarf_version=4),
        Program("p12", [filler_mask(12, True), filler_gap(12, True), filler_fold(12, True)]),
        Program("p13", [filler_walk(13, True), filler_lerp(13, True), filler_acc(13, True)]),
        Program("p14", [fn_clampf(), filler_mask(14, True), filler_gap(14, True)]),
        Program("p15", [filler_walk(15, True), filler_fold(15, True), filler_acc(15, True)]),
        Program("p16", [fn_bit_reverse(mk_alias(7)), filler_lerp(16, True), filler_mask(16, True)]),
        Program("p17", [filler_acc(17, True), filler_gap(17, True), filler_walk(17, True)]),
        Program("p18", [fn_twin_stack(), filler_mask(18, True), filler_lerp(18, True)]),
        Program("p19", [fn_big_search(), fn_broken_parse(), filler_fold(19, True), filler_acc(19, True)]),
        Program("p20", [fn_counter_bump(), fn_thunk_exit(), filler_gap(20, True), filler_walk(20, True)]),
    ]
    seen: set[tuple[str, str]] = set()
    for p in progs:
        for fn in p.fns:
            key = (p.name, fn.name)
            if key in seen:
                raise SystemExit(f"duplicate function {key}")
            seen.add(key)
    return progs


# ---------------------------------------------------------------------------
# C emission and compilation

def emit_c(prog: Program) -> str:
    parts = [PRELUDE, ""]
    for fn in prog.fns:
        decls = ", ".join(p.cdecl.replace("{n}", p.name) for p in fn.params)
        parts.append(f"{fn.ret_c} {fn.name}({decls or 'void'})")
        parts.append("{")
        for loc in fn.locs:
            parts.append(f"    {loc.cdecl.replace('{n}', loc.name)};")
        if fn.c_body:
            parts.append(fn.c_body)
        parts.append("}")
        parts.append("")
    parts.append("int main(void)\n{\n    return 0;\n}")
    return "\n".join(parts) + "\n"


def compile_program(src: Path, out: Path, dwarf_version: int) -> None:
    # Relative paths + prefix map keep build-directory names out of the debug
    # info, so the same program hashes identically wherever it is built.
    root = src.parent.parent
    cmd = [
        "gcc",
        "-O0",
        "-g",
        "-w",
        f"-ffile-prefix-map={root}=.",
        "-o",
        str(out.relative_to(root)),
        str(src.relative_to(root)),
    ]
    if dwarf_version == 4:
        cmd.insert(3, "-gdwarf-4")
    subprocess.run(cmd, check=True, cwd=root)


def strip_copy(binary: Path, out: Path) -> None:
    subprocess.run(["objcopy", "--strip-all", str(binary), str(out)], check=True)


# ---------------------------------------------------------------------------
# the recorder: export records for both views

_LETTER = {
    "int": "i",
    "uint": "u",
    "char": "c",
    "uchar": "b",
    "short": "s",
    "ushort": "u",
    "long": "l",
    "ulong": "u",
    "float": "f",
    "double": "d",
    "bool": "b",
}


def _letter(ty: dict) -> str:
    kind = ty["kind"]
    if kind == "primitive":
        return _LETTER.get(ty["name"], "u")
    if kind == "pointer":
        inner = _letter(ty["target"])
        return "p" + (inner if len(inner) == 1 else "u")
    if kind == "array":
        return "a" + _letter(ty["element"])
    return "u"


def assign_storage(fn: Fn) -> dict[str, dict]:
    """Positional storage for every debug-view variable of `fn`."""
    st: dict[str, dict] = {}
    for i, p in enumerate(fn.params):
        if p.size <= 8:
            st[p.name] = {"kind": "register", "value": 0x30 + 8 * i, "size": p.size}
        else:
            st[p.name] = {"kind": "stack", "value": 0x10 + 0x10 * i, "size": p.size}
    off = 0
    for loc in fn.locs:
        step = max(8, (loc.size + 7) // 8 * 8)
        off -= step
        st[loc.name] = {"kind": "stack", "value": off, "size": loc.size}
    for j, al in enumerate(fn.aliases):
        st[al.name] = {"kind": "unique", "value": 0x9C00 + 0x10 * j, "size": al.size}
    for v, addr in fn.rams:
        st[v.name] = {"kind": "ram", "value": addr, "size": v.size}
    return st


def stripped_names(fn: Fn, st: dict[str, dict]) -> dict[str, str]:
    """Debug name -> decompiler-generated name for the stripped view."""
    out: dict[str, str] = {}
    for i, p in enumerate(fn.params):
        out[p.name] = f"param_{i + 1}"
    ctr = 1
    for v in list(fn.locs) + list(fn.aliases):
        s = st[v.name]
        if s["kind"] == "stack":
            out[v.name] = f"local_{abs(s['value']):x}"
        else:
            out[v.name] = f"{_letter(v.ty)}Var{ctr}"
        ctr += 1
    for v, addr in fn.rams:
        out[v.name] = f"DAT_{addr:08x}"
    return out


_MARK = re.compile(r"\$(\w+)\$")
_GMARK = re.compile(r"@(\w+)@")


def render_code(fn: Fn, view: str, names: dict[str, str], fname: str) -> str:
    if fn.status != "ok" or fn.empty_code:
        return ""

    def var(m: re.Match) -> str:
        return names[m.group(1)]

    def glob(m: re.Match) -> str:
        g = m.group(1)
        if view == "debug":
            return g
        return f"_DAT_{GLOBAL_ADDRS[g]:08x}"

    ret = render_type(type_from_obj(fn.ret_ty))
    sig_params = ", ".join(
        f"{render_type(type_from_obj(p.ty))} {names[p.name]}" for p in fn.params
    )
    lines = [f"{ret} {fname}({sig_params})", "{"]
    for raw in fn.pseudo:
        line = _MARK.sub(var, raw)
        line = _GMARK.sub(glob, line)
        lines.append("  " + line if line else line)
    lines.append("}")
    return "\n".join(lines) + "\n"


def record_views(fn: Fn, binary_id: str, entry: int) -> tuple[dict, dict]:
    st = assign_storage(fn)
    ren = stripped_names(fn, st)
    ordered = list(fn.params) + list(fn.locs) + [v for v, _ in fn.rams] + list(fn.aliases)

    debug_vars = [
        {"name": v.name, "storage": st[v.name], "type": v.ty} for v in ordered
    ]
    debug = {
        "schema": 1,
        "binary": binary_id,
        "function": fn.name,
        "entry": entry,
        "view": "debug",
        "status": fn.status,
        "code": render_code(fn, "debug", {v.name: v.name for v in ordered}, fn.name),
        "variables": debug_vars if fn.status == "ok" else [],
    }

    sfname = f"FUN_{entry:08x}"
    stripped_vars = []
    for v in ordered:
        s = dict(st[v.name])
        stripped_vars.append({"name": ren[v.name], "storage": s, "type": v.ty})
    if fn.ambiguous and len(fn.locs) >= 2:
        # decompiler merged two stack pieces onto one slot
        dup = dict(stripped_vars[len(fn.params)]["storage"])
        stripped_vars[len(fn.params) + 1]["storage"] = dup
    for j, ex in enumerate(fn.extras):
        stripped_vars.append(
            {
                "name": f"uVar{70 + j}",
                "storage": {"kind": "unique", "value": 0x9E00 + 0x10 * j, "size": ex.size},
                "type": ex.ty,
            }
        )
    stripped = {
        "schema": 1,
        "binary": binary_id,
        "function": sfname,
        "entry": entry,
        "view": "stripped",
        "status": fn.status,
        "code": render_code(fn, "stripped", ren, sfname),
        "variables": stripped_vars if fn.status == "ok" else [],
    }
    return debug, stripped


# ---------------------------------------------------------------------------
# sanity gate: the corpus has to make <disappear> the dominant gold label

def check_label_balance(gold_counts: Counter) -> None:
    disappear = gold_counts.pop("<disappear>", 0)
    top_real = gold_counts.most_common(1)
    top_n = top_real[0][1] if top_real else 0
    if disappear < int(top_n * 1.2) + 1:
        raise SystemExit(
            f"fixture imbalance: {disappear} disappear vs top real type "
            f"{top_real[0] if top_real else None}; add invented variables"
        )


# ---------------------------------------------------------------------------

def build(out_dir: Path, keep_sources: bool = True) -> dict:
    # Absolute from the start: the compile step's prefix map must cover the
    # compilation directory gcc records, or a relative --out leaks the
    # build location into the binaries (and their hashes).
    out_dir = Path(out_dir).resolve()
    src_dir = out_dir / "src"
    bin_dir = out_dir / "bin"
    stripped_dir = out_dir / "stripped"
    export_dir = out_dir / "exports"
    for d in (src_dir, bin_dir, stripped_dir, export_dir):
        d.mkdir(parents=True, exist_ok=True)

    programs = build_programs()
    manifest: dict = {"schema": 1, "programs": {}, "shared_function": "block_crc"}
    gold_counts: Counter = Counter()
    shared_programs = []

    for prog in programs:
        c_path = src_dir / f"{prog.name}.c"
        c_path.write_text(emit_c(prog))
        bin_path = bin_dir / prog.name
        compile_program(c_path, bin_path, prog.dwarf_version)
        strip_copy(bin_path, stripped_dir / prog.name)

        index = index_binary(bin_path)
        entries = {fe.name: fe.entry for fe in index.per_function.values()}

        debug_lines = []
        stripped_lines = []
        fn_manifest = {}
        for fn in prog.fns:
            if fn.name not in entries:
                raise SystemExit(f"{prog.name}: no debug entry for {fn.name}")
            entry = entries[fn.name]
            debug, stripped = record_views(fn, index.binary_id, entry)
            debug_lines.append(json.dumps(debug, sort_keys=True))
            stripped_lines.append(json.dumps(stripped, sort_keys=True))

            declared = [v.name for v in fn.params + fn.locs]
            invented = [v.name for v in fn.aliases]
            ram_names = [v.name for v, _ in fn.rams]
            if fn.status == "ok":
                for name in declared:
                    ty = index.lookup(f"{fn.name}@{entry:#x}", name)
                    if ty is None:
                        raise SystemExit(
                            f"{prog.name}/{fn.name}: {name} missing from debug info"
                        )
                    gold_counts[render_type(ty)] += 1
                for name in ram_names:
                    if index.lookup(f"{fn.name}@{entry:#x}", name) is None:
                        raise SystemExit(
                            f"{prog.name}/{fn.name}: global {name} not indexed"
                        )
                gold_counts["<disappear>"] += len(invented)

            st = assign_storage(fn)
            fn_manifest[fn.name] = {
                "entry": entry,
                "status": fn.status,
                "shared": fn.shared,
                "ambiguous": fn.ambiguous,
                "empty_code": fn.empty_code,
                "declared": declared,
                "invented": invented,
                "globals_as_vars": ram_names,
                "stripped_extras": len(fn.extras),
                "stripped_names": stripped_names(fn, st),
                "placeholder_names": [
                    v.name for v in fn.params + fn.locs + fn.aliases
                ],
            }
            if fn.shared:
                shared_programs.append(prog.name)

        (export_dir / f"{prog.name}.debug.jsonl").write_text(
            "\n".join(debug_lines) + "\n"
        )
        (export_dir / f"{prog.name}.stripped.jsonl").write_text(
            "\n".join(stripped_lines) + "\n"
        )

        manifest["programs"][prog.name] = {
            "binary": str(bin_path.relative_to(out_dir)),
            "stripped": str(stripped_dir.relative_to(out_dir) / prog.name),
            "binary_id": index.binary_id,
            "dwarf_version": prog.dwarf_version,
            "functions": fn_manifest,
        }

    manifest["shared_programs"] = shared_programs
    manifest["gold_counts"] = dict(sorted(gold_counts.items()))
    check_label_balance(Counter(gold_counts))

    # every recorded line must survive the strict export validator
    for path in sorted(export_dir.glob("*.jsonl")):
        for lineno, line in enumerate(path.read_text().splitlines(), 1):
            try:
                parse_export_record(line)
            except Exception as exc:  # pragma: no cover - build-time guard
                raise SystemExit(f"{path.name}:{lineno}: bad record: {exc}")

    (out_dir / "fixtures.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n"
    )
    if not keep_sources:
        for p in src_dir.glob("*.c"):
            p.unlink()
    return manifest


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("fixtures/build"))
    args = ap.parse_args(argv)
    manifest = build(args.out)
    n_fns = sum(len(p["functions"]) for p in manifest["programs"].values())
    print(
        f"built {len(manifest['programs'])} binaries, {n_fns} functions "
        f"-> {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
