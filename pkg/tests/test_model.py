"""Encoding, network numerics, and the checkpoint container."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from retyper.errors import ValidationError
from retyper.model import nn
from retyper.model.checkpoint import load_checkpoint, read_header, save_checkpoint
from retyper.model.config import ModelConfig, TrainConfig
from retyper.model.core import RetyperModel, new_model
from retyper.model.encode import (
    BUCKET_EDGES,
    N_BUCKETS,
    RESERVED_TOKENS,
    TokenVocab,
    build_vocab,
    encode_example,
    lexicon_size_array,
    offset_bucket,
    size_bucket,
)
from retyper.typelib import (
    DISAPPEAR_TEXT,
    UNKNOWN_TEXT,
    build_type_lexicon,
    render_type,
)

SMALL = ModelConfig(
    d_model=16,
    n_heads=2,
    n_layers=1,
    d_ff=24,
    vocab_size=64,
    n_types=8,
    max_seq_len=32,
    seed=5,
)


# -- buckets -----------------------------------------------------------------


def test_size_buckets_split_on_power_of_two_edges():
    assert size_bucket(1) == 0
    assert size_bucket(2) == 1
    assert size_bucket(3) == 2
    assert size_bucket(4) == 2
    assert size_bucket(8) == 3
    assert size_bucket(12) == 4
    assert size_bucket(64) == len(BUCKET_EDGES) - 1
    assert size_bucket(65) == N_BUCKETS - 1
    assert size_bucket(10**6) == N_BUCKETS - 1


def test_offset_bucket_ignores_sign():
    assert offset_bucket(-24) == offset_bucket(24)
    assert offset_bucket(-1) == 0


# -- vocabulary --------------------------------------------------------------


def test_vocab_reserves_unknown_and_var(corpus_debug):
    vocab = build_vocab(corpus_debug.train.examples, 128)
    assert vocab.tokens[:2] == RESERVED_TOKENS
    assert len(vocab) <= 128
    assert vocab.id_of("never-seen-token-xyz") == 0
    assert vocab.var_id == 1
    # placeholder-bound names never enter the vocabulary
    for ex in corpus_debug.train.examples:
        for t in ex.record.tokens:
            if t.is_placeholder:
                break
        else:
            continue
        break
    assert "{" in vocab.tokens  # punctuation is ordinary vocabulary


def test_vocab_ranked_by_frequency(corpus_debug):
    vocab = build_vocab(corpus_debug.train.examples, 512)
    from collections import Counter

    counts = Counter(
        t.text
        for ex in corpus_debug.train.examples
        for t in ex.record.tokens
        if not t.is_placeholder
    )
    body = vocab.tokens[2:]
    observed = [counts[t] for t in body]
    assert observed == sorted(observed, reverse=True)


def test_vocab_size_floor():
    with pytest.raises(ValueError):
        build_vocab([], 2)
    with pytest.raises(ValueError):
        TokenVocab(("a", "b"))  # reserved tokens missing


def test_encoding_binds_placeholders_to_the_shared_id(corpus_debug):
    ex = next(
        e for e in corpus_debug.train.examples if len(e.record.variables) >= 2
    )
    lexicon = build_type_lexicon(
        t for e in corpus_debug.train.examples for t in e.gold_types.values()
    )
    vocab = build_vocab(corpus_debug.train.examples, 256)
    enc = encode_example(ex, vocab, lexicon, 256)
    assert len(enc.token_ids) == len(ex.record.tokens)
    names = {v.name for v in enc.variables}
    assert names == {v.decomp_name for v in ex.record.variables}
    for i, t in enumerate(ex.record.tokens):
        if t.is_placeholder:
            assert enc.token_ids[i] == vocab.var_id
    for var in enc.variables:
        occurrences = [
            i
            for i, t in enumerate(ex.record.tokens)
            if t.is_placeholder and t.var == var.name
        ]
        assert list(var.positions) == occurrences
        gold = ex.gold_types[var.name]
        assert var.label == lexicon.rank_of(render_type(gold))


def test_encoding_truncates_long_bodies(corpus_debug):
    ex = max(corpus_debug.train.examples, key=lambda e: len(e.record.tokens))
    lexicon = build_type_lexicon(
        t for e in corpus_debug.train.examples for t in e.gold_types.values()
    )
    vocab = build_vocab(corpus_debug.train.examples, 256)
    limit = len(ex.record.tokens) // 2
    enc = encode_example(ex, vocab, lexicon, limit)
    assert len(enc.token_ids) == limit
    for var in enc.variables:
        assert all(p < limit for p in var.positions)


def test_lexicon_sizes_feed_the_mask(corpus_debug):
    lexicon = build_type_lexicon(
        t for e in corpus_debug.train.examples for t in e.gold_types.values()
    )
    sizes = lexicon_size_array(lexicon)
    assert len(sizes) == len(lexicon)
    assert sizes[lexicon.disappear_rank] == 0.0  # sentinels never conflict
    assert sizes[lexicon.unknown_rank] == 0.0
    r = lexicon.rank_of("int")
    if r is not None:
        assert sizes[r] == 4.0


# -- network numerics --------------------------------------------------------


def test_size_mask_marks_only_real_conflicts():
    sizes = np.array([0.0, 4.0, 8.0, 1.0])
    mask = nn.size_mask(4, sizes)
    assert mask.tolist() == [0.0, 0.0, 1.0, 1.0]


def test_masked_distribution_matches_a_scalar_oracle():
    logits = np.array([1.0, 2.0, 0.5, -1.0])
    sizes = np.array([0.0, 4.0, 8.0, 4.0])
    penalty = 3.0
    probs = nn.masked_distribution(logits, 8, sizes, penalty)
    # independent scalar computation
    adjusted = [
        logits[i] - (penalty if sizes[i] != 0 and sizes[i] != 8 else 0.0)
        for i in range(4)
    ]
    norm = sum(math.exp(a) for a in adjusted)
    expect = [math.exp(a) / norm for a in adjusted]
    assert np.allclose(probs, expect)
    assert math.isclose(probs.sum(), 1.0)
    # the penalty moved mass toward size-compatible entries
    unmasked = nn.masked_distribution(logits, 8, sizes, 0.0)
    assert probs[2] > unmasked[2]
    assert probs[1] < unmasked[1]


def test_sinusoidal_positions_structure():
    pos = nn.sinusoidal_positions(10, 8)
    assert pos.shape == (10, 8)
    assert np.abs(pos).max() <= 1.0
    assert np.allclose(pos[0, 0::2], 0.0)  # sin(0)
    assert np.allclose(pos[0, 1::2], 1.0)  # cos(0)
    assert not np.allclose(pos[1], pos[2])


def test_init_params_deterministic_shapes():
    a = nn.init_params(SMALL)
    b = nn.init_params(SMALL)
    assert sorted(a) == sorted(b)
    for k in a:
        assert np.array_equal(a[k], b[k])
    assert a["tok_emb"].shape == (SMALL.vocab_size, SMALL.d_model)
    assert a["head.W"].shape == (SMALL.d_model, SMALL.n_types)
    assert a["l0.W1"].shape == (SMALL.d_model, SMALL.d_ff)


def test_encoder_output_is_deterministic():
    params = nn.init_params(SMALL)
    positions = nn.sinusoidal_positions(SMALL.max_seq_len, SMALL.d_model)
    ids = np.array([3, 1, 4, 1, 5], dtype=np.int64)
    x1 = nn.encode_tokens(params, ids, SMALL, positions)
    x2 = nn.encode_tokens(params, ids, SMALL, positions)
    assert x1.shape == (5, SMALL.d_model)
    assert np.array_equal(x1, x2)


def test_example_probs_are_distributions(corpus_debug):
    model = new_model(SMALL, corpus_debug.train)
    ex = corpus_debug.train.examples[0]
    from retyper.model.encode import encode_example as enc_ex

    enc = enc_ex(ex, model.vocab, model.lexicon, model.config.max_seq_len)
    probs = nn.example_probs(
        model.params, enc, model.config, model.positions, model.type_sizes
    )
    assert len(probs) == len(enc.variables)
    for p in probs:
        assert p.shape == (model.config.n_types,)
        assert math.isclose(p.sum(), 1.0, rel_tol=1e-9)
        assert (p >= 0).all()


# -- the model object --------------------------------------------------------


def test_new_model_sizes_config_from_train_split(corpus_debug):
    model = new_model(SMALL, corpus_debug.train)
    assert model.config.n_types == len(model.lexicon)
    assert model.config.vocab_size == len(model.vocab)
    assert model.lexicon.rank_of(DISAPPEAR_TEXT) is not None
    assert model.lexicon.rank_of(UNKNOWN_TEXT) is not None


def test_model_rejects_mismatched_lexicon(corpus_debug):
    model = new_model(SMALL, corpus_debug.train)
    wrong = ModelConfig(
        **{**model.config.to_obj(), "n_types": model.config.n_types + 1}
    )
    with pytest.raises(ValueError):
        RetyperModel(wrong, model.vocab, model.lexicon, model.params)


def test_predict_covers_every_variable(corpus_debug):
    model = new_model(SMALL, corpus_debug.train)
    ex = corpus_debug.test.examples[0]
    pred = model.predict(ex)
    assert set(pred.variables) == {v.decomp_name for v in ex.record.variables}
    for _t, conf in pred.variables.values():
        assert 1.0 / model.config.n_types <= conf <= 1.0


# -- configs -----------------------------------------------------------------


def test_model_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(d_model=30, n_heads=4)
    with pytest.raises(ValueError):
        ModelConfig(d_ff=0)
    with pytest.raises(ValueError):
        ModelConfig(mask_penalty=-1.0)
    obj = ModelConfig().to_obj()
    assert ModelConfig.from_obj(obj) == ModelConfig()


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(clip_norm=0.0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    assert TrainConfig(batch_size=None).batch_size is None


# -- checkpoints -------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path, corpus_debug):
    model = new_model(SMALL, corpus_debug.train)
    path = tmp_path / "model.rtyp"
    save_checkpoint(model, path, manifest_hash="f00dfeed")
    back = load_checkpoint(path)
    assert back.config == model.config
    assert back.vocab.tokens == model.vocab.tokens
    assert back.lexicon == model.lexicon
    assert sorted(back.params) == sorted(model.params)
    for k in model.params:
        assert np.array_equal(back.params[k], model.params[k])
    assert back.parameter_checksum() == model.parameter_checksum()
    assert read_header(path)["manifest_hash"] == "f00dfeed"


def test_checkpoint_bytes_are_deterministic(tmp_path, corpus_debug):
    model = new_model(SMALL, corpus_debug.train)
    a = tmp_path / "a.rtyp"
    b = tmp_path / "b.rtyp"
    save_checkpoint(model, a)
    save_checkpoint(model, b)
    assert a.read_bytes() == b.read_bytes()


def test_checkpoint_rejects_corruption(tmp_path, corpus_debug):
    model = new_model(SMALL, corpus_debug.train)
    path = tmp_path / "model.rtyp"
    save_checkpoint(model, path)
    blob = path.read_bytes()

    bad_magic = tmp_path / "magic.rtyp"
    bad_magic.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(ValidationError):
        load_checkpoint(bad_magic)

    truncated = tmp_path / "short.rtyp"
    truncated.write_bytes(blob[:-16])
    with pytest.raises(ValidationError):
        load_checkpoint(truncated)

    trailing = tmp_path / "long.rtyp"
    trailing.write_bytes(blob + b"\x00" * 8)
    with pytest.raises(ValidationError):
        load_checkpoint(trailing)

    header = read_header(path)
    hash_bytes = json.dumps(header["lexicon_hash"]).encode()[1:-1]
    flipped = (b"0" if hash_bytes[:1] != b"0" else b"1") + hash_bytes[1:]
    tampered = tmp_path / "hash.rtyp"
    tampered.write_bytes(blob.replace(hash_bytes, flipped, 1))
    with pytest.raises(ValidationError):
        load_checkpoint(tampered)


def test_checkpoint_predictions_survive_the_round_trip(tmp_path, corpus_debug):
    model = new_model(SMALL, corpus_debug.train)
    path = tmp_path / "model.rtyp"
    save_checkpoint(model, path)
    back = load_checkpoint(path)
    ex = corpus_debug.test.examples[0]
    before = model.predict(ex)
    after = back.predict(ex)
    for name in before.variables:
        t0, c0 = before.variables[name]
        t1, c1 = after.variables[name]
        assert render_type(t0) == render_type(t1)
        assert c0 == c1
