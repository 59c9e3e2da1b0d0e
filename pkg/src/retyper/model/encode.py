"""Turning labeled examples into model inputs.

Tokens become vocabulary ids; every variable-placeholder token shares one
reserved id (names carry no signal across binaries — stripped-view names are
decompiler serial numbers), so a variable is represented by where it occurs
plus its storage layout. Sizes and offsets are bucketed on power-of-two edges.
"""

from __future__ import annotations

import bisect
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from ..corpus import LabeledExample
from ..ingest import STORAGE_KINDS
from ..typelib import TypeLexicon

log = logging.getLogger(__name__)

UNKNOWN_TOKEN = "<unknown>"
VAR_TOKEN = "<var>"
RESERVED_TOKENS = (UNKNOWN_TOKEN, VAR_TOKEN)

# Upper edges of the size/offset buckets; values above the last edge clamp
# into the final bucket. Size 12 lands in the bucket whose edge is 16.
BUCKET_EDGES = (1, 2, 4, 8, 16, 32, 64)
N_BUCKETS = len(BUCKET_EDGES) + 1
N_KINDS = len(STORAGE_KINDS)


def size_bucket(size: int) -> int:
    return min(bisect.bisect_left(BUCKET_EDGES, size), N_BUCKETS - 1)


def offset_bucket(value: int) -> int:
    return size_bucket(abs(value))


@dataclass(frozen=True)
class TokenVocab:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if self.tokens[: len(RESERVED_TOKENS)] != RESERVED_TOKENS:
            raise ValueError("vocabulary must start with the reserved tokens")
        object.__setattr__(
            self, "_ids", {t: i for i, t in enumerate(self.tokens)}
        )

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, text: str) -> int:
        return self._ids.get(text, 0)  # unknown id is 0

    @property
    def var_id(self) -> int:
        return 1


def build_vocab(
    examples: Iterable[LabeledExample], max_size: int
) -> TokenVocab:
    """Frequency-ranked vocabulary over non-placeholder token texts."""
    if max_size <= len(RESERVED_TOKENS):
        raise ValueError(f"vocabulary size {max_size} leaves no room for tokens")
    counts: Counter = Counter()
    for ex in examples:
        for t in ex.record.tokens:
            if not t.is_placeholder:
                counts[t.text] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    keep = [text for text, _ in ranked[: max_size - len(RESERVED_TOKENS)]]
    return TokenVocab(RESERVED_TOKENS + tuple(keep))


@dataclass(frozen=True)
class EncodedVar:
    name: str
    label: int  # lexicon rank of the gold type
    size: int
    kind_id: int
    size_bucket: int
    offset_bucket: int
    positions: tuple[int, ...]  # token indices where this variable occurs


@dataclass(frozen=True)
class EncodedExample:
    token_ids: np.ndarray  # (n,) int64
    variables: tuple[EncodedVar, ...]

    def __eq__(self, other):  # ndarray fields break dataclass equality
        return (
            isinstance(other, EncodedExample)
            and np.array_equal(self.token_ids, other.token_ids)
            and self.variables == other.variables
        )


def encode_example(
    ex: LabeledExample,
    vocab: TokenVocab,
    lexicon: TypeLexicon,
    max_seq_len: int,
) -> EncodedExample:
    tokens = ex.record.tokens
    if len(tokens) > max_seq_len:
        log.warning(
            "%s: truncating %d tokens to %d",
            ex.record.function_id,
            len(tokens),
            max_seq_len,
        )
        tokens = tokens[:max_seq_len]
    ids = np.empty(len(tokens), dtype=np.int64)
    positions: dict[str, list[int]] = {v.decomp_name: [] for v in ex.record.variables}
    for i, t in enumerate(tokens):
        if t.is_placeholder:
            ids[i] = vocab.var_id
            positions[t.var].append(i)
        else:
            ids[i] = vocab.id_of(t.text)
    variables = tuple(
        EncodedVar(
            v.decomp_name,
            lexicon.label_for(ex.gold_types[v.decomp_name]),
            v.size,
            STORAGE_KINDS.index(v.storage.kind),
            size_bucket(v.size),
            offset_bucket(v.storage.value),
            tuple(positions[v.decomp_name]),
        )
        for v in ex.record.variables
    )
    return EncodedExample(ids, variables)


def encode_split(
    examples: Iterable[LabeledExample],
    vocab: TokenVocab,
    lexicon: TypeLexicon,
    max_seq_len: int,
) -> list[EncodedExample]:
    return [encode_example(ex, vocab, lexicon, max_seq_len) for ex in examples]


def lexicon_size_array(
    lexicon: TypeLexicon, pointer_size: int = 8
) -> np.ndarray:
    """Byte size of every lexicon entry, for the soft size mask."""
    from ..typelib import size_of

    return np.array(
        [size_of(e.type, pointer_size) for e in lexicon.entries], dtype=np.float64
    )
