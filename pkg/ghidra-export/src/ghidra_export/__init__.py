"""Headless Ghidra driver exporting per-function decompilation records.

The exporter runs inside Ghidra (PyGhidra) and writes one line-delimited JSON
record per function per view; everything downstream consumes only those
files. Every module except ghidra_backend is plain Python and fully testable
without a Ghidra installation.
"""

from .exporter import FunctionInfo, DecompResult, VariableInfo, export_binary
from .interchange import InterchangeError, make_record, serialize, validate_record
from .resume import ResumableWriter, completed_keys
from .stripper import StripError, has_debug_info, strip_binary

__all__ = [
    "FunctionInfo",
    "DecompResult",
    "VariableInfo",
    "export_binary",
    "InterchangeError",
    "make_record",
    "serialize",
    "validate_record",
    "ResumableWriter",
    "completed_keys",
    "StripError",
    "has_debug_info",
    "strip_binary",
]
