"""The trained artifact: config + vocabularies + parameters, plus inference."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..corpus import CorpusSplit, LabeledExample
from ..errors import EmptyCorpusError
from ..predictors import RETYPER, Prediction
from ..typelib import TypeLexicon, build_type_lexicon
from . import nn
from .config import ModelConfig
from .encode import (
    TokenVocab,
    build_vocab,
    encode_example,
    lexicon_size_array,
)


@dataclass
class RetyperModel:
    config: ModelConfig
    vocab: TokenVocab
    lexicon: TypeLexicon
    params: dict[str, np.ndarray]
    _positions: np.ndarray = field(init=False, repr=False)
    _type_sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.lexicon) != self.config.n_types:
            raise ValueError(
                f"lexicon has {len(self.lexicon)} entries, "
                f"config expects {self.config.n_types}"
            )
        self._positions = nn.sinusoidal_positions(
            self.config.max_seq_len, self.config.d_model
        )
        self._type_sizes = lexicon_size_array(self.lexicon)

    @property
    def positions(self) -> np.ndarray:
        return self._positions

    @property
    def type_sizes(self) -> np.ndarray:
        return self._type_sizes

    def predict(self, ex: LabeledExample) -> Prediction:
        """Arg-max type per variable; confidence is that type's probability."""
        enc = encode_example(ex, self.vocab, self.lexicon, self.config.max_seq_len)
        probs = nn.example_probs(
            self.params, enc, self.config, self._positions, self._type_sizes
        )
        typed = {}
        for var, p in zip(enc.variables, probs):
            rank = int(np.argmax(p))
            typed[var.name] = (self.lexicon.type_at(rank), float(p[rank]))
        return Prediction(
            ex.record.binary_id, ex.record.function_id, RETYPER, typed
        )

    def parameter_checksum(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for name in sorted(self.params):
            h.update(name.encode())
            h.update(self.params[name].astype("<f8").tobytes())
        return h.hexdigest()


def new_model(
    config: ModelConfig, train: CorpusSplit, min_type_count: int = 1
) -> RetyperModel:
    """Initialize a model with vocabularies built from the train split only."""
    if not train.examples:
        raise EmptyCorpusError("cannot initialize a model from an empty train split")
    lexicon = build_type_lexicon(
        (
            t
            for ex in train.examples
            for t in ex.gold_types.values()
        ),
        min_count=min_type_count,
    )
    config = ModelConfig(**{**config.to_obj(), "n_types": len(lexicon)})
    vocab = build_vocab(train.examples, config.vocab_size)
    config = ModelConfig(**{**config.to_obj(), "vocab_size": len(vocab)})
    return RetyperModel(config, vocab, lexicon, nn.init_params(config))
