"""Decompiler-export parsing and code canonicalization.

One function per line, UTF-8 JSON (see docs/interchange.md). Records are
validated structurally here; filtering decisions (timeouts, empty bodies)
belong to the corpus builder. Decompiled code is canonicalized into a flat
lexical token stream with variable occurrences bound as placeholder tokens —
no attempt is made to parse the pseudo-C, which is not always grammatical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .errors import ParseError, ValidationError
from .typelib import TypeDesc, type_from_obj, type_to_obj

SCHEMA_VERSION = 1
STORAGE_KINDS = ("stack", "register", "unique", "ram")
VIEWS = ("debug", "stripped")
STATUSES = ("ok", "failed", "timeout")

# Placeholder tokens hash as this sentinel, so fingerprints ignore variable
# names. NUL cannot survive lexing, so no real token can collide with it.
PLACEHOLDER_SENTINEL = "\x00v\x00"
# body_fingerprint(()) — the digest of zero tokens, pinned as a constant.
EMPTY_FINGERPRINT = "e4a6a0577479b2b4"


@dataclass(frozen=True)
class StorageLocation:
    kind: str  # stack | register | unique | ram
    value: int  # frame-relative offset, register number, or address
    size: int

    def key(self) -> tuple[str, int, int]:
        return (self.kind, self.value, self.size)


@dataclass(frozen=True)
class VariableRecord:
    decomp_name: str
    storage: StorageLocation
    decomp_type: TypeDesc

    @property
    def size(self) -> int:
        return self.storage.size


@dataclass(frozen=True)
class Token:
    text: str
    var: Optional[str] = None  # decomp_name this placeholder is bound to

    @property
    def is_placeholder(self) -> bool:
        return self.var is not None


@dataclass(frozen=True)
class FunctionRecord:
    binary_id: str
    name: str
    entry: int
    view: str  # debug | stripped
    decompile_status: str  # ok | failed | timeout
    raw_code: str
    variables: tuple[VariableRecord, ...]
    tokens: tuple[Token, ...]

    @property
    def function_id(self) -> str:
        return f"{self.name}@{self.entry:#x}"

    def placeholder_count(self) -> int:
        return sum(1 for t in self.tokens if t.is_placeholder)


# -- parsing -----------------------------------------------------------------


def parse_export_record(line: str) -> FunctionRecord:
    """Parse and fully validate one interchange line."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, offset=e.pos) from e
    if not isinstance(obj, dict):
        raise ValidationError("record is not an object")

    schema = obj.get("schema")
    if schema != SCHEMA_VERSION:
        raise ValidationError(f"schema: expected {SCHEMA_VERSION}, got {schema!r}")
    binary = _need_str(obj, "binary")
    name = _need_str(obj, "function")
    entry = _need_int(obj, "entry")
    view = _need_str(obj, "view")
    if view not in VIEWS:
        raise ValidationError(f"view: unknown variant {view!r}")
    status = _need_str(obj, "status")
    if status not in STATUSES:
        raise ValidationError(f"status: unknown variant {status!r}")
    code = obj.get("code", "")
    if not isinstance(code, str):
        raise ValidationError("code: expected text")

    raw_vars = obj.get("variables")
    if not isinstance(raw_vars, list):
        raise ValidationError("variables: expected a list")
    variables = []
    seen_names = set()
    for i, rv in enumerate(raw_vars):
        v = _parse_variable(rv, i)
        if v.decomp_name in seen_names:
            raise ValidationError(
                f"variables[{i}].name: duplicate {v.decomp_name!r}"
            )
        seen_names.add(v.decomp_name)
        variables.append(v)

    if "tokens" in obj:
        tokens = _parse_tokens(obj["tokens"], seen_names)
    elif status == "ok":
        tokens = canonicalize_tokens(code, variables)
    else:
        tokens = ()
    if status != "ok" and tokens:
        raise ValidationError(f"tokens: must be empty when status is {status!r}")

    return FunctionRecord(
        binary, name, entry, view, status, code, tuple(variables), tokens
    )


def _parse_variable(obj: object, i: int) -> VariableRecord:
    if not isinstance(obj, dict):
        raise ValidationError(f"variables[{i}]: expected an object")
    where = f"variables[{i}]"
    name = _need_str(obj, "name", where)
    if not name:
        raise ValidationError(f"{where}.name: empty")
    storage = obj.get("storage")
    if not isinstance(storage, dict):
        raise ValidationError(f"{where}.storage: expected an object")
    kind = _need_str(storage, "kind", f"{where}.storage")
    if kind not in STORAGE_KINDS:
        raise ValidationError(f"{where}.storage.kind: unknown variant {kind!r}")
    value = _need_int(storage, "value", f"{where}.storage")
    size = _need_int(storage, "size", f"{where}.storage")
    if size <= 0:
        raise ValidationError(f"{where}.storage.size: must be positive, got {size}")
    if "type" not in obj:
        raise ValidationError(f"{where}.type: missing")
    try:
        decomp_type = type_from_obj(obj["type"])
    except ValueError as e:
        raise ValidationError(f"{where}.type: {e}") from e
    return VariableRecord(name, StorageLocation(kind, value, size), decomp_type)


def _parse_tokens(raw: object, var_names: set[str]) -> tuple[Token, ...]:
    if not isinstance(raw, list):
        raise ValidationError("tokens: expected a list")
    out = []
    for i, item in enumerate(raw):
        if not (isinstance(item, list) and len(item) == 2):
            raise ValidationError(f"tokens[{i}]: expected [text, variable-or-null]")
        text, var = item
        if not isinstance(text, str):
            raise ValidationError(f"tokens[{i}]: text must be a string")
        if var is not None:
            if not isinstance(var, str):
                raise ValidationError(f"tokens[{i}]: variable reference must be text")
            if var not in var_names:
                raise ValidationError(
                    f"tokens[{i}]: references unknown variable {var!r}"
                )
        elif PLACEHOLDER_SENTINEL in text:
            raise ValidationError(f"tokens[{i}]: text contains the placeholder sentinel")
        out.append(Token(text, var))
    return tuple(out)


def _need_str(obj: dict, key: str, where: str = "") -> str:
    v = obj.get(key)
    if not isinstance(v, str):
        prefix = f"{where}." if where else ""
        raise ValidationError(f"{prefix}{key}: missing or not text")
    return v


def _need_int(obj: dict, key: str, where: str = "") -> int:
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool):
        prefix = f"{where}." if where else ""
        raise ValidationError(f"{prefix}{key}: missing or not an integer")
    return v


def serialize_record(fr: FunctionRecord) -> str:
    """One interchange line; parse_export_record inverts this exactly."""
    obj = {
        "schema": SCHEMA_VERSION,
        "binary": fr.binary_id,
        "function": fr.name,
        "entry": fr.entry,
        "view": fr.view,
        "status": fr.decompile_status,
        "code": fr.raw_code,
        "variables": [
            {
                "name": v.decomp_name,
                "storage": {
                    "kind": v.storage.kind,
                    "value": v.storage.value,
                    "size": v.storage.size,
                },
                "type": type_to_obj(v.decomp_type),
            }
            for v in fr.variables
        ],
        "tokens": [[t.text, t.var] for t in fr.tokens],
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def read_export_file(path) -> Iterator[FunctionRecord]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield parse_export_record(line)
            except (ParseError, ValidationError) as e:
                raise type(e)(f"{path}:{lineno}: {e}") from e


# -- tokenization ------------------------------------------------------------

_IDENT_START = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_"
)
_IDENT_CONT = _IDENT_START | frozenset("0123456789")
_DIGITS = frozenset("0123456789")

# Longest-match C operator set, three chars down to one.
_OPS3 = ("<<=", ">>=", "...")
_OPS2 = (
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::",
)


def canonicalize_tokens(
    raw_code: str, variables: Iterable[VariableRecord]
) -> tuple[Token, ...]:
    """Lex pseudo-C into tokens, binding variable-name identifiers.

    Comments and whitespace are dropped; string/char/numeric literals are kept
    verbatim as single tokens. Total: any unrecognized byte becomes its own
    token rather than failing.
    """
    names = {v.decomp_name for v in variables}
    out: list[Token] = []
    src = raw_code
    n = len(src)
    i = 0
    while i < n:
        c = src[i]
        if c in " \t\r\n\f\v":
            i += 1
            continue
        if c == "/" and i + 1 < n:
            if src[i + 1] == "/":
                j = src.find("\n", i)
                i = n if j < 0 else j + 1
                continue
            if src[i + 1] == "*":
                j = src.find("*/", i + 2)
                i = n if j < 0 else j + 2
                continue
        if c in _IDENT_START:
            j = i + 1
            while j < n and src[j] in _IDENT_CONT:
                j += 1
            text = src[i:j]
            out.append(Token(text, text if text in names else None))
            i = j
            continue
        if c in _DIGITS or (c == "." and i + 1 < n and src[i + 1] in _DIGITS):
            i = _lex_number(src, i, out)
            continue
        if c == '"' or c == "'":
            i = _lex_quoted(src, i, out)
            continue
        if src[i : i + 3] in _OPS3:
            out.append(Token(src[i : i + 3]))
            i += 3
            continue
        if src[i : i + 2] in _OPS2:
            out.append(Token(src[i : i + 2]))
            i += 2
            continue
        out.append(Token(c))
        i += 1
    return tuple(out)


def _lex_number(src: str, i: int, out: list[Token]) -> int:
    # Preprocessor-number style: digits, letters, underscores, dots, and
    # exponent signs all belong to one literal (covers 0x1p-3, 1e+9, 10UL).
    n = len(src)
    is_hex = src.startswith(("0x", "0X"), i)
    j = i + 1
    while j < n:
        c = src[j]
        if c in _IDENT_CONT or c == ".":
            j += 1
        elif c in "+-" and (
            src[j - 1] in "pP" or (src[j - 1] in "eE" and not is_hex)
        ):
            # exponent sign: 1e+9, 0x1p-3; but 0xFE+1 is an addition
            j += 1
        else:
            break
    out.append(Token(src[i:j]))
    return j


def _lex_quoted(src: str, i: int, out: list[Token]) -> int:
    quote = src[i]
    n = len(src)
    j = i + 1
    while j < n:
        if src[j] == "\\" and j + 1 < n:
            j += 2
            continue
        if src[j] == quote:
            j += 1
            break
        j += 1
    out.append(Token(src[i:j]))
    return j


# -- fingerprinting ----------------------------------------------------------


def body_fingerprint(tokens: Iterable[Token]) -> str:
    """64-bit hex digest of the token stream, placeholder names normalized.

    Each token contributes its UTF-8 text (placeholders contribute the fixed
    sentinel instead) length-prefixed, so no concatenation of distinct streams
    collides. The empty stream digests to EMPTY_FINGERPRINT.
    """
    h = hashlib.blake2b(digest_size=8)
    for t in tokens:
        b = (PLACEHOLDER_SENTINEL if t.var is not None else t.text).encode("utf-8")
        h.update(len(b).to_bytes(4, "little"))
        h.update(b)
    return h.hexdigest()
