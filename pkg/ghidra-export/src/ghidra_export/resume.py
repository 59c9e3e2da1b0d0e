"""Make long export runs restartable.

A batch over thousands of binaries will be interrupted; the cheap unit of
recovery is the function. Records already present in the output file are
keyed by (entry address, view) — names differ between views, entries don't —
and a rerun appends only the missing ones.

A run killed mid-write leaves one unterminated final line and nothing else
(records are flushed one at a time), so exactly that case is repaired: the
partial tail is dropped and its function re-exported. A malformed line that
*is* newline-terminated cannot come from this writer; that file was produced
or edited by something else, and touching it would risk silent data loss.
"""

from __future__ import annotations

import json
from pathlib import Path

from .interchange import serialize


class ResumeError(RuntimeError):
    pass


def _lines_and_tail(path: Path):
    """Complete newline-terminated lines, plus any unterminated tail."""
    data = path.read_text(encoding="utf-8")
    if data.endswith("\n"):
        return data[:-1].split("\n") if data != "\n" else [""], None
    if "\n" not in data:
        return [], data
    body, tail = data.rsplit("\n", 1)
    return body.split("\n"), tail


def completed_keys(path) -> set:
    """(entry, view) pairs already present in an output file."""
    path = Path(path)
    if not path.exists():
        return set()
    lines, _tail = _lines_and_tail(path)
    keys = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            keys.add((int(obj["entry"]), str(obj["view"])))
        except (ValueError, KeyError, TypeError):
            raise ResumeError(f"{path}:{lineno}: unreadable record")
    return keys


class ResumableWriter:
    """Append-mode record writer that skips already-exported functions."""

    def __init__(self, path):
        self.path = Path(path)
        self._done = completed_keys(self.path)
        self.written = 0
        self.skipped = 0
        self._f = None

    def __enter__(self):
        self._drop_partial_tail()
        self._f = open(self.path, "a", encoding="utf-8")
        return self

    def __exit__(self, *exc):
        self._f.close()
        self._f = None

    def _drop_partial_tail(self):
        if not self.path.exists():
            return
        lines, tail = _lines_and_tail(self.path)
        if tail is not None:
            kept = "".join(line + "\n" for line in lines if line)
            self.path.write_text(kept, encoding="utf-8")

    def skip(self, entry: int, view: str) -> bool:
        if (entry, view) in self._done:
            self.skipped += 1
            return True
        return False

    def write(self, record: dict) -> None:
        self._f.write(serialize(record))
        self._f.write("\n")
        self._f.flush()  # each record survives a kill on its own
        self._done.add((record["entry"], record["view"]))
        self.written += 1


__all__ = ["ResumeError", "ResumableWriter", "completed_keys"]
