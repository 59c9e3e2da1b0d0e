"""Transformer encoder and classification head, with handwritten backprop.

Everything is float64 numpy: embeddings scaled by sqrt(d) plus sinusoidal
positions, post-LN encoder layers (multi-head self-attention, then a ReLU
feed-forward block, each wrapped in residual + LayerNorm), a mean-pool over
each variable's placeholder positions added to an embedded storage-layout
vector, and a softmax over the type lexicon with an additive soft size mask:
types whose byte size is neither 0 nor the variable's size lose λ of logit.

Gradients are derived by hand and validated against central finite
differences (see gradcheck). No autograd, no accelerator — the model is
deliberately small enough to train on a laptop CPU.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..errors import DivergenceError
from .config import ModelConfig
from .encode import N_BUCKETS, N_KINDS, EncodedExample

LN_EPS = 1e-5
LAYOUT_EMB_DIM = 8
ATTN_SUM_TOL = 1e-6

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def _gelu(x: np.ndarray) -> np.ndarray:
    # tanh approximation — smooth everywhere, so finite differences agree
    # with the analytic gradient at every sampled coordinate.
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + _GELU_A * x**3)))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    t = np.tanh(_GELU_C * (x + _GELU_A * x**3))
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * x**2)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * du


def sinusoidal_positions(max_len: int, d: int) -> np.ndarray:
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    i = np.arange((d + 1) // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / d)
    out = np.zeros((max_len, d))
    out[:, 0::2] = np.sin(angle)
    out[:, 1::2] = np.cos(angle[:, : d // 2])
    return out


def init_params(config: ModelConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(config.seed)
    d, ff = config.d_model, config.d_ff

    def w(*shape):
        return rng.normal(0.0, 0.02, size=shape)

    p: dict[str, np.ndarray] = {"tok_emb": w(config.vocab_size, d)}
    for l in range(config.n_layers):
        for name in ("Wq", "Wk", "Wv", "Wo"):
            p[f"l{l}.{name}"] = w(d, d)
        for name in ("bq", "bk", "bv", "bo"):
            p[f"l{l}.{name}"] = np.zeros(d)
        p[f"l{l}.ln1.g"] = np.ones(d)
        p[f"l{l}.ln1.b"] = np.zeros(d)
        p[f"l{l}.W1"] = w(d, ff)
        p[f"l{l}.b1"] = np.zeros(ff)
        p[f"l{l}.W2"] = w(ff, d)
        p[f"l{l}.b2"] = np.zeros(d)
        p[f"l{l}.ln2.g"] = np.ones(d)
        p[f"l{l}.ln2.b"] = np.zeros(d)
    if config.use_layout:
        p["layout.kind"] = w(N_KINDS, LAYOUT_EMB_DIM)
        p["layout.size"] = w(N_BUCKETS, LAYOUT_EMB_DIM)
        p["layout.off"] = w(N_BUCKETS, LAYOUT_EMB_DIM)
        p["layout.W"] = w(3 * LAYOUT_EMB_DIM, d)
        p["layout.b"] = np.zeros(d)
    p["head.W"] = w(d, config.n_types)
    p["head.b"] = np.zeros(config.n_types)
    return p


def size_mask(var_size: int, type_sizes: np.ndarray) -> np.ndarray:
    """1.0 for lexicon entries whose size conflicts with the variable's."""
    return ((type_sizes != 0) & (type_sizes != var_size)).astype(np.float64)


def masked_distribution(
    logits: np.ndarray, var_size: int, type_sizes: np.ndarray, penalty: float
) -> np.ndarray:
    """Softmax over logits after subtracting λ from size-conflicting types."""
    z = logits - penalty * size_mask(var_size, type_sizes)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv_std
    return xhat * g + b, (xhat, inv_std)


def _layer_norm_backward(dy, g, cache, dg, db):
    xhat, inv_std = cache
    dg += (dy * xhat).sum(axis=0)
    db += dy.sum(axis=0)
    dxhat = dy * g
    return inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )


def _split_heads(x: np.ndarray, h: int) -> np.ndarray:
    n, d = x.shape
    return x.reshape(n, h, d // h).transpose(1, 0, 2)  # (h, n, dh)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def encode_tokens(
    params: dict[str, np.ndarray],
    token_ids: np.ndarray,
    config: ModelConfig,
    positions: np.ndarray,
    cache: Optional[list] = None,
) -> np.ndarray:
    """Run the encoder stack; optionally record intermediates for backprop."""
    d, h = config.d_model, config.n_heads
    n = len(token_ids)
    x = params["tok_emb"][token_ids] * math.sqrt(d) + positions[:n]
    for l in range(config.n_layers):
        x_in = x
        q = _split_heads(x_in @ params[f"l{l}.Wq"] + params[f"l{l}.bq"], h)
        k = _split_heads(x_in @ params[f"l{l}.Wk"] + params[f"l{l}.bk"], h)
        v = _split_heads(x_in @ params[f"l{l}.Wv"] + params[f"l{l}.bv"], h)
        scale = 1.0 / math.sqrt(d // h)
        scores = q @ k.transpose(0, 2, 1) * scale
        scores -= scores.max(axis=-1, keepdims=True)
        attn = np.exp(scores)
        attn /= attn.sum(axis=-1, keepdims=True)
        if n:
            sums = attn.sum(axis=-1)
            if not np.isfinite(sums).all():
                raise DivergenceError("non-finite attention weights")
            assert np.abs(sums - 1.0).max() < ATTN_SUM_TOL
        ctx = _merge_heads(attn @ v)
        r1 = x_in + ctx @ params[f"l{l}.Wo"] + params[f"l{l}.bo"]
        x1, ln1_cache = _layer_norm(r1, params[f"l{l}.ln1.g"], params[f"l{l}.ln1.b"])
        h_pre = x1 @ params[f"l{l}.W1"] + params[f"l{l}.b1"]
        h_act = _gelu(h_pre)
        r2 = x1 + h_act @ params[f"l{l}.W2"] + params[f"l{l}.b2"]
        x, ln2_cache = _layer_norm(r2, params[f"l{l}.ln2.g"], params[f"l{l}.ln2.b"])
        if cache is not None:
            cache.append(
                dict(
                    x_in=x_in,
                    q=q,
                    k=k,
                    v=v,
                    attn=attn,
                    ctx=ctx,
                    ln1=ln1_cache,
                    x1=x1,
                    h_pre=h_pre,
                    h_act=h_act,
                    ln2=ln2_cache,
                )
            )
    return x


def _encoder_backward(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    token_ids: np.ndarray,
    caches: list,
    dx: np.ndarray,
    config: ModelConfig,
):
    d, h = config.d_model, config.n_heads
    scale = 1.0 / math.sqrt(d // h)
    for l in reversed(range(config.n_layers)):
        c = caches[l]
        dr2 = _layer_norm_backward(
            dx, params[f"l{l}.ln2.g"], c["ln2"],
            grads[f"l{l}.ln2.g"], grads[f"l{l}.ln2.b"],
        )
        # r2 = x1 + gelu(x1 W1 + b1) W2 + b2
        grads[f"l{l}.W2"] += c["h_act"].T @ dr2
        grads[f"l{l}.b2"] += dr2.sum(axis=0)
        dh_act = dr2 @ params[f"l{l}.W2"].T
        dh_pre = dh_act * _gelu_grad(c["h_pre"])
        grads[f"l{l}.W1"] += c["x1"].T @ dh_pre
        grads[f"l{l}.b1"] += dh_pre.sum(axis=0)
        dx1 = dr2 + dh_pre @ params[f"l{l}.W1"].T
        dr1 = _layer_norm_backward(
            dx1, params[f"l{l}.ln1.g"], c["ln1"],
            grads[f"l{l}.ln1.g"], grads[f"l{l}.ln1.b"],
        )
        # r1 = x_in + (merge(attn @ v)) Wo + bo
        grads[f"l{l}.Wo"] += c["ctx"].T @ dr1
        grads[f"l{l}.bo"] += dr1.sum(axis=0)
        dctx = _split_heads(dr1 @ params[f"l{l}.Wo"].T, h)
        dattn = dctx @ c["v"].transpose(0, 2, 1)
        dv = c["attn"].transpose(0, 2, 1) @ dctx
        a = c["attn"]
        dscores = a * (dattn - (dattn * a).sum(axis=-1, keepdims=True))
        dq = dscores @ c["k"] * scale
        dk = dscores.transpose(0, 2, 1) @ c["q"] * scale
        dx_in = dr1
        for mat, bias, dval in (
            ("Wq", "bq", dq), ("Wk", "bk", dk), ("Wv", "bv", dv),
        ):
            flat = _merge_heads(dval)
            grads[f"l{l}.{mat}"] += c["x_in"].T @ flat
            grads[f"l{l}.{bias}"] += flat.sum(axis=0)
            dx_in = dx_in + flat @ params[f"l{l}.{mat}"].T
        dx = dx_in
    np.add.at(grads["tok_emb"], token_ids, dx * math.sqrt(d))


def _variable_forward(
    params: dict[str, np.ndarray],
    states: np.ndarray,
    var,
    config: ModelConfig,
    type_sizes: np.ndarray,
):
    d = config.d_model
    if var.positions:
        pooled = states[list(var.positions)].mean(axis=0)
    else:
        pooled = np.zeros(d)
    if config.use_layout:
        cat = np.concatenate(
            [
                params["layout.kind"][var.kind_id],
                params["layout.size"][var.size_bucket],
                params["layout.off"][var.offset_bucket],
            ]
        )
        rep = pooled + cat @ params["layout.W"] + params["layout.b"]
    else:
        cat = None
        rep = pooled
    logits = rep @ params["head.W"] + params["head.b"]
    z = logits - config.mask_penalty * size_mask(var.size, type_sizes)
    zmax = z.max()
    log_norm = zmax + math.log(np.exp(z - zmax).sum())
    probs = np.exp(z - log_norm)
    return rep, cat, probs, log_norm - z[var.label]


def example_probs(
    params: dict[str, np.ndarray],
    enc: EncodedExample,
    config: ModelConfig,
    positions: np.ndarray,
    type_sizes: np.ndarray,
) -> list[np.ndarray]:
    """Per-variable distributions over the lexicon (inference path)."""
    states = encode_tokens(params, enc.token_ids, config, positions)
    out = []
    for var in enc.variables:
        _rep, _cat, probs, _loss = _variable_forward(
            params, states, var, config, type_sizes
        )
        out.append(probs)
    return out


def example_loss_and_grads(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    enc: EncodedExample,
    config: ModelConfig,
    positions: np.ndarray,
    type_sizes: np.ndarray,
    loss_scale: float,
) -> tuple[float, int]:
    """Accumulate gradients of (loss_scale · summed CE) for one example.

    Returns (summed cross-entropy, correctly argmaxed variable count).
    """
    if not enc.variables:
        return 0.0, 0
    caches: list = []
    states = encode_tokens(params, enc.token_ids, config, positions, caches)
    d = config.d_model
    dstates = np.zeros_like(states)
    loss_sum = 0.0
    correct = 0
    for var in enc.variables:
        rep, cat, probs, loss = _variable_forward(
            params, states, var, config, type_sizes
        )
        loss_sum += loss
        if int(np.argmax(probs)) == var.label:
            correct += 1
        dz = probs * loss_scale
        dz[var.label] -= loss_scale
        grads["head.W"] += np.outer(rep, dz)
        grads["head.b"] += dz
        drep = params["head.W"] @ dz
        if config.use_layout:
            grads["layout.W"] += np.outer(cat, drep)
            grads["layout.b"] += drep
            dcat = params["layout.W"] @ drep
            k = LAYOUT_EMB_DIM
            grads["layout.kind"][var.kind_id] += dcat[:k]
            grads["layout.size"][var.size_bucket] += dcat[k : 2 * k]
            grads["layout.off"][var.offset_bucket] += dcat[2 * k :]
        if var.positions:
            dstates[list(var.positions)] += drep / len(var.positions)
    if len(enc.token_ids):
        _encoder_backward(params, grads, enc.token_ids, caches, dstates, config)
    return loss_sum, correct


def batch_loss_and_grads(
    params: dict[str, np.ndarray],
    batch: list[EncodedExample],
    config: ModelConfig,
    positions: np.ndarray,
    type_sizes: np.ndarray,
) -> tuple[float, dict[str, np.ndarray], int, int]:
    """Mean per-variable cross-entropy and its gradients over a batch."""
    n_vars = sum(len(e.variables) for e in batch)
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    if n_vars == 0:
        return 0.0, grads, 0, 0
    total = 0.0
    correct = 0
    for enc in batch:
        loss_sum, corr = example_loss_and_grads(
            params, grads, enc, config, positions, type_sizes, 1.0 / n_vars
        )
        total += loss_sum
        correct += corr
    return total / n_vars, grads, correct, n_vars


def batch_loss(
    params: dict[str, np.ndarray],
    batch: list[EncodedExample],
    config: ModelConfig,
    positions: np.ndarray,
    type_sizes: np.ndarray,
) -> float:
    """Loss only — used by the finite-difference oracle."""
    n_vars = sum(len(e.variables) for e in batch)
    if n_vars == 0:
        return 0.0
    total = 0.0
    for enc in batch:
        states = encode_tokens(params, enc.token_ids, config, positions)
        for var in enc.variables:
            _rep, _cat, _probs, loss = _variable_forward(
                params, states, var, config, type_sizes
            )
            total += loss
    return total / n_vars
