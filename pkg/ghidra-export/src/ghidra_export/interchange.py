"""Build and validate export records before they leave the process.

This is the producer's half of the line-delimited record format the analysis
pipeline ingests; the format itself is documented on the consumer side
(docs/interchange.md there). Records are validated *here*, before emission,
so a mapping bug surfaces as a loud error in the export log rather than as a
rejected line in someone's corpus build hours later.

The validator is deliberately a little stricter than the consumer's parser:
non-ok records must be completely empty (no code, no variables, no tokens)
and binary ids must be 64-hex SHA-256 strings, because that is all this
exporter ever legitimately produces.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

SCHEMA_VERSION = 1
VIEWS = ("debug", "stripped")
STATUSES = ("ok", "failed", "timeout")
STORAGE_KINDS = ("stack", "register", "unique", "ram")
TYPE_KINDS = (
    "primitive",
    "pointer",
    "array",
    "struct",
    "union",
    "enum",
    "function",
    "void",
    "disappear",
)

_HEX = set("0123456789abcdef")


class InterchangeError(ValueError):
    """A record violated the export format before emission."""


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def make_record(
    binary_id: str,
    function: str,
    entry: int,
    view: str,
    status: str,
    code: str = "",
    variables=None,
    tokens=None,
) -> dict:
    """Assemble one record dict and validate it; raises InterchangeError."""
    record = {
        "schema": SCHEMA_VERSION,
        "binary": binary_id,
        "function": function,
        "entry": entry,
        "view": view,
        "status": status,
        "code": code,
        "variables": list(variables or []),
        "tokens": [list(t) for t in tokens] if tokens else [],
    }
    validate_record(record)
    return record


def serialize(record: dict) -> str:
    """One output line; matches the consumer's own serialization byte for byte."""
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def write_records(path, records) -> int:
    """Serialize records to a file, one per line; returns the count."""
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(serialize(r))
            f.write("\n")
            n += 1
    return n


# -- validation --------------------------------------------------------------


def validate_record(record: dict) -> None:
    if not isinstance(record, dict):
        raise InterchangeError("record is not an object")
    if record.get("schema") != SCHEMA_VERSION:
        raise InterchangeError(f"schema: expected {SCHEMA_VERSION}")
    binary = _str(record, "binary")
    if len(binary) != 64 or not set(binary) <= _HEX:
        raise InterchangeError("binary: expected 64 lowercase hex characters")
    if not _str(record, "function"):
        raise InterchangeError("function: empty")
    entry = record.get("entry")
    if not isinstance(entry, int) or isinstance(entry, bool) or entry < 0:
        raise InterchangeError("entry: expected a non-negative integer")
    if record.get("view") not in VIEWS:
        raise InterchangeError(f"view: unknown variant {record.get('view')!r}")
    status = record.get("status")
    if status not in STATUSES:
        raise InterchangeError(f"status: unknown variant {status!r}")
    code = record.get("code", "")
    if not isinstance(code, str):
        raise InterchangeError("code: expected text")

    variables = record.get("variables")
    if not isinstance(variables, list):
        raise InterchangeError("variables: expected a list")
    names = set()
    for i, v in enumerate(variables):
        _validate_variable(v, i)
        if v["name"] in names:
            raise InterchangeError(f"variables[{i}].name: duplicate {v['name']!r}")
        names.add(v["name"])

    tokens = record.get("tokens", [])
    if not isinstance(tokens, list):
        raise InterchangeError("tokens: expected a list")
    for i, t in enumerate(tokens):
        if not isinstance(t, (list, tuple)) or len(t) != 2:
            raise InterchangeError(f"tokens[{i}]: expected [text, variable-or-null]")
        text, var = t
        if not isinstance(text, str) or "\x00" in text:
            raise InterchangeError(f"tokens[{i}]: text must be NUL-free text")
        if var is not None:
            if not isinstance(var, str):
                raise InterchangeError(f"tokens[{i}]: variable reference must be text")
            if var not in names:
                raise InterchangeError(
                    f"tokens[{i}]: references unknown variable {var!r}"
                )

    if status != "ok" and (code or variables or tokens):
        raise InterchangeError(
            f"status {status!r}: code, variables, and tokens must be empty"
        )


def _validate_variable(v: object, i: int) -> None:
    where = f"variables[{i}]"
    if not isinstance(v, dict):
        raise InterchangeError(f"{where}: expected an object")
    if not isinstance(v.get("name"), str) or not v["name"]:
        raise InterchangeError(f"{where}.name: missing or empty")
    storage = v.get("storage")
    if not isinstance(storage, dict):
        raise InterchangeError(f"{where}.storage: expected an object")
    if storage.get("kind") not in STORAGE_KINDS:
        raise InterchangeError(
            f"{where}.storage.kind: unknown variant {storage.get('kind')!r}"
        )
    value = storage.get("value")
    if not isinstance(value, int) or isinstance(value, bool):
        raise InterchangeError(f"{where}.storage.value: expected an integer")
    size = storage.get("size")
    if not isinstance(size, int) or isinstance(size, bool) or size <= 0:
        raise InterchangeError(f"{where}.storage.size: expected a positive integer")
    if "type" not in v:
        raise InterchangeError(f"{where}.type: missing")
    validate_type_obj(v["type"], f"{where}.type")


def validate_type_obj(obj: object, where: str = "type") -> None:
    """Recursive check of one kind-discriminated type object."""
    if not isinstance(obj, dict):
        raise InterchangeError(f"{where}: expected an object")
    kind = obj.get("kind")
    if kind == "primitive":
        if not isinstance(obj.get("name"), str) or not obj["name"]:
            raise InterchangeError(f"{where}.name: missing or empty")
        _int_field(obj, "size", where)
    elif kind == "pointer":
        validate_type_obj(obj.get("target"), f"{where}.target")
    elif kind == "array":
        validate_type_obj(obj.get("element"), f"{where}.element")
        if _int_field(obj, "count", where) < 0:
            raise InterchangeError(f"{where}.count: negative")
    elif kind in ("struct", "union"):
        if not isinstance(obj.get("tag"), str) or not obj["tag"]:
            raise InterchangeError(f"{where}.tag: missing or empty")
        _int_field(obj, "size", where)
        members = obj.get("fields" if kind == "struct" else "members")
        if not isinstance(members, list):
            raise InterchangeError(f"{where}: missing field list")
        for i, f in enumerate(members):
            if not isinstance(f, dict):
                raise InterchangeError(f"{where}[{i}]: expected an object")
            if not isinstance(f.get("name"), str) or not f["name"]:
                raise InterchangeError(f"{where}[{i}].name: missing or empty")
            _int_field(f, "offset", f"{where}[{i}]")
            _int_field(f, "size", f"{where}[{i}]")
            validate_type_obj(f.get("type"), f"{where}[{i}].type")
    elif kind == "enum":
        if not isinstance(obj.get("tag"), str) or not obj["tag"]:
            raise InterchangeError(f"{where}.tag: missing or empty")
        _int_field(obj, "size", where)
    elif kind == "function":
        validate_type_obj(obj.get("return"), f"{where}.return")
        params = obj.get("params")
        if not isinstance(params, list):
            raise InterchangeError(f"{where}.params: expected a list")
        for i, p in enumerate(params):
            validate_type_obj(p, f"{where}.params[{i}]")
    elif kind in ("void", "disappear"):
        pass
    else:
        raise InterchangeError(f"{where}.kind: unknown variant {kind!r}")


def _str(record: dict, key: str) -> str:
    v = record.get(key)
    if not isinstance(v, str):
        raise InterchangeError(f"{key}: missing or not text")
    return v


def _int_field(obj: dict, key: str, where: str) -> int:
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise InterchangeError(f"{where}.{key}: expected an integer")
    return v


def binary_error_record(binary_id: str, view: str) -> dict:
    """Record standing in for a binary that could not be imported at all.

    Downstream accounting sees the binary appear with one failed pseudo
    function instead of silently vanishing from the batch.
    """
    return make_record(binary_id, "<import-failed>", 0, view, "failed")


__all__ = [
    "SCHEMA_VERSION",
    "VIEWS",
    "STATUSES",
    "STORAGE_KINDS",
    "TYPE_KINDS",
    "InterchangeError",
    "sha256_of",
    "make_record",
    "serialize",
    "write_records",
    "validate_record",
    "validate_type_obj",
    "binary_error_record",
]
