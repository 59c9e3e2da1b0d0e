"""Finite-difference validation of the handwritten backprop.

Samples individual scalar parameters, perturbs each by ±h, and compares the
analytic gradient against the central difference. Relative error uses
|a − n| / max(|a| + |n|, 1e-8), so exact zeros on both sides pass cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .config import ModelConfig
from .encode import N_BUCKETS, N_KINDS, EncodedExample, EncodedVar

FD_STEP = 1e-4
DEFAULT_TOLERANCE = 1e-3

TINY_CONFIG = ModelConfig(
    d_model=16,
    n_heads=2,
    n_layers=2,
    d_ff=24,
    vocab_size=12,
    n_types=7,
    max_seq_len=8,
    mask_penalty=2.0,
    seed=13,
)


@dataclass(frozen=True)
class GradCheckFailure:
    param: str
    index: tuple[int, ...]
    analytic: float
    numeric: float
    rel_err: float


@dataclass(frozen=True)
class GradCheckReport:
    checked: int
    max_rel_err: float
    tolerance: float
    failures: tuple[GradCheckFailure, ...]

    @property
    def passed(self) -> bool:
        return not self.failures


def synthetic_batch(
    config: ModelConfig, n_examples: int = 4, seed: int = 99
) -> list[EncodedExample]:
    """Random token/variable batch covering empty-position and multi-size
    variables, for checking gradients without a real corpus."""
    rng = np.random.default_rng(seed)
    sizes = (1, 2, 4, 8, 12)
    batch = []
    for i in range(n_examples):
        n = int(rng.integers(2, config.max_seq_len + 1))
        ids = rng.integers(0, config.vocab_size, size=n).astype(np.int64)
        n_vars = int(rng.integers(1, 4))
        variables = []
        for j in range(n_vars):
            # the first variable always has zero occurrences, pinning the
            # pooled-representation fallback into every check
            k = 0 if i == 0 and j == 0 else int(rng.integers(0, n + 1))
            positions = tuple(
                sorted(rng.choice(n, size=k, replace=False).tolist())
            )
            size = int(sizes[rng.integers(0, len(sizes))])
            variables.append(
                EncodedVar(
                    name=f"v{j}",
                    label=int(rng.integers(0, config.n_types)),
                    size=size,
                    kind_id=int(rng.integers(0, N_KINDS)),
                    size_bucket=int(rng.integers(0, N_BUCKETS)),
                    offset_bucket=int(rng.integers(0, N_BUCKETS)),
                    positions=positions,
                )
            )
        batch.append(EncodedExample(ids, tuple(variables)))
    return batch


def gradient_check(
    config: ModelConfig = TINY_CONFIG,
    tolerance: float = DEFAULT_TOLERANCE,
    n_samples: int = 220,
    seed: int = 7,
) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    params = nn.init_params(config)
    positions = nn.sinusoidal_positions(config.max_seq_len, config.d_model)
    # Synthetic lexicon sizes: include 0 (always-legal types) and real sizes.
    type_sizes = rng.choice(
        np.array([0.0, 1.0, 2.0, 4.0, 8.0]), size=config.n_types
    )
    type_sizes[0] = 0.0
    batch = synthetic_batch(config)

    _loss, grads, _c, _n = nn.batch_loss_and_grads(
        params, batch, config, positions, type_sizes
    )

    names = sorted(params)
    total = sum(params[k].size for k in names)
    picks = rng.choice(total, size=min(n_samples, total), replace=False)
    flat_index = []
    for k in names:
        flat_index.append((k, params[k].size))

    failures = []
    max_err = 0.0
    for pick in sorted(int(p) for p in picks):
        rem = pick
        for name, size in flat_index:
            if rem < size:
                break
            rem -= size
        arr = params[name]
        idx = np.unravel_index(rem, arr.shape)
        orig = arr[idx]
        arr[idx] = orig + FD_STEP
        up = nn.batch_loss(params, batch, config, positions, type_sizes)
        arr[idx] = orig - FD_STEP
        down = nn.batch_loss(params, batch, config, positions, type_sizes)
        arr[idx] = orig
        numeric = (up - down) / (2.0 * FD_STEP)
        analytic = float(grads[name][idx])
        rel = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-8)
        max_err = max(max_err, rel)
        if rel > tolerance:
            failures.append(
                GradCheckFailure(name, tuple(int(i) for i in idx), analytic, numeric, rel)
            )
    return GradCheckReport(len(picks), max_err, tolerance, tuple(failures))
