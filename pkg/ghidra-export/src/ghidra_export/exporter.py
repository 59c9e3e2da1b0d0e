"""Turn one analyzed binary into a stream of validated export records.

All decompiler contact goes through a backend object (ghidra_backend for the
real thing, a fake in the tests), so the policy code here — timeout handling,
failure records, storage encoding, resume — runs and is tested without a
Ghidra installation.

Backend protocol (duck-typed):

    backend.functions() -> iterable of FunctionInfo
    backend.decompile(fn: FunctionInfo, timeout_seconds: int) -> DecompResult

decompile reports trouble through DecompResult.status ("timeout"/"failed");
an exception escaping it is also caught and becomes a failed record, because
one pathological function must never cost the rest of the binary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from .interchange import make_record
from .typemap import map_type

DEFAULT_TIMEOUT_SECONDS = 180  # hard per-function decompilation budget


@dataclass(frozen=True)
class FunctionInfo:
    name: str
    entry: int
    handle: object = None  # backend's own function object, passed back opaquely


@dataclass(frozen=True)
class VariableInfo:
    name: str
    storage_kind: str  # stack | register | unique | ram
    storage_value: int
    storage_size: int
    dtype: object  # decompiler data type, mapped via typemap


@dataclass
class DecompResult:
    status: str  # ok | failed | timeout
    code: str = ""
    variables: list = field(default_factory=list)
    tokens: Optional[list] = None  # [(text, variable-name-or-None), ...]


def export_binary(
    backend,
    binary_id: str,
    view: str,
    timeout_seconds: int = DEFAULT_TIMEOUT_SECONDS,
    resume=None,
) -> Iterator[dict]:
    """Yield one validated record per function; never raises per-function.

    `binary_id` must be the SHA-256 of the *unstripped* binary for both
    views — it is the join key between the views and the ground truth, so
    the caller exporting a stripped twin passes the original's hash.
    """
    for fn in backend.functions():
        if resume is not None and resume.skip(fn.entry, view):
            continue
        try:
            result = backend.decompile(fn, timeout_seconds)
        except Exception:
            result = DecompResult(status="failed")
        if result.status == "ok":
            record = make_record(
                binary_id,
                fn.name,
                fn.entry,
                view,
                "ok",
                code=result.code,
                variables=[_variable_obj(v) for v in result.variables],
                tokens=result.tokens,
            )
        else:
            status = result.status if result.status == "timeout" else "failed"
            record = make_record(binary_id, fn.name, fn.entry, view, status)
        yield record


def _variable_obj(v: VariableInfo) -> dict:
    return {
        "name": v.name,
        "storage": {
            "kind": v.storage_kind,
            "value": v.storage_value,
            "size": v.storage_size,
        },
        "type": map_type(v.dtype),
    }


__all__ = [
    "DEFAULT_TIMEOUT_SECONDS",
    "FunctionInfo",
    "VariableInfo",
    "DecompResult",
    "export_binary",
]
