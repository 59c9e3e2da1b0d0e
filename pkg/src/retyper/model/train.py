"""Deterministic single-threaded training with Adam and gradient clipping.

The default regime is full-batch: one optimizer step per epoch over the whole
train split, which keeps the first-epoch-improves invariant meaningful and
the run bitwise reproducible. Minibatching is available via batch_size; the
shuffle is driven by the model seed.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..corpus import CorpusSplit
from ..errors import DivergenceError, EmptyCorpusError
from . import nn
from .config import TrainConfig
from .core import RetyperModel
from .encode import EncodedExample, encode_split

log = logging.getLogger(__name__)

ADAM_B1 = 0.9
ADAM_B2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class EpochStats:
    epoch: int  # 0 is pre-training evaluation
    loss: float
    train_accuracy: float
    valid_accuracy: float


@dataclass
class TrainingLog:
    rows: list[EpochStats]
    best_epoch: int
    best_valid_accuracy: float

    def write_csv(self, path: Path):
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "loss", "train_accuracy", "valid_accuracy"])
            for r in self.rows:
                w.writerow(
                    [
                        r.epoch,
                        f"{r.loss:.17g}",
                        f"{r.train_accuracy:.17g}",
                        f"{r.valid_accuracy:.17g}",
                    ]
                )


class _Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float):
        self.lr = lr
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        bc1 = 1.0 - ADAM_B1**self.t
        bc2 = 1.0 - ADAM_B2**self.t
        for k, g in grads.items():
            m = self.m[k]
            v = self.v[k]
            m *= ADAM_B1
            m += (1.0 - ADAM_B1) * g
            v *= ADAM_B2
            v += (1.0 - ADAM_B2) * g * g
            params[k] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def _accuracy(
    model: RetyperModel, encoded: list[EncodedExample]
) -> float:
    correct = 0
    total = 0
    for enc in encoded:
        probs = nn.example_probs(
            model.params, enc, model.config, model.positions, model.type_sizes
        )
        for var, p in zip(enc.variables, probs):
            total += 1
            if int(np.argmax(p)) == var.label:
                correct += 1
    return correct / total if total else 0.0


def train_model(
    model: RetyperModel,
    train: CorpusSplit,
    valid: CorpusSplit,
    tcfg: TrainConfig,
) -> TrainingLog:
    """Minimize mean per-variable cross-entropy; keep the best-validation
    parameters. Mutates model.params in place."""
    if not train.examples or not valid.examples:
        raise EmptyCorpusError("training requires non-empty train and valid splits")
    cfg = model.config
    train_enc = encode_split(train.examples, model.vocab, model.lexicon, cfg.max_seq_len)
    valid_enc = encode_split(valid.examples, model.vocab, model.lexicon, cfg.max_seq_len)
    rng = np.random.default_rng(cfg.seed)
    opt = _Adam(model.params, tcfg.learning_rate)

    init_loss = nn.batch_loss(
        model.params, train_enc, cfg, model.positions, model.type_sizes
    )
    rows = [
        EpochStats(0, init_loss, _accuracy(model, train_enc), _accuracy(model, valid_enc))
    ]
    best_valid = rows[0].valid_accuracy
    best_epoch = 0
    best_params = {k: v.copy() for k, v in model.params.items()}

    for epoch in range(1, tcfg.epochs + 1):
        order = rng.permutation(len(train_enc))
        if tcfg.batch_size is None:
            batches = [[train_enc[i] for i in order]]
        else:
            batches = [
                [train_enc[i] for i in order[s : s + tcfg.batch_size]]
                for s in range(0, len(order), tcfg.batch_size)
            ]
        epoch_loss = 0.0
        epoch_vars = 0
        epoch_correct = 0
        try:
            for batch in batches:
                loss, grads, correct, n_vars = nn.batch_loss_and_grads(
                    model.params, batch, cfg, model.positions, model.type_sizes
                )
                if not math.isfinite(loss):
                    raise DivergenceError(f"non-finite loss {loss}")
                clip_gradients(grads, tcfg.clip_norm)
                opt.step(model.params, grads)
                epoch_loss += loss * n_vars
                epoch_vars += n_vars
                epoch_correct += correct
            train_acc = epoch_correct / epoch_vars if epoch_vars else 0.0
            valid_acc = _accuracy(model, valid_enc)
        except DivergenceError as e:
            raise DivergenceError(
                f"epoch {epoch}: {e} (lr={tcfg.learning_rate}, "
                f"best epoch so far {best_epoch})"
            ) from None
        rows.append(
            EpochStats(epoch, epoch_loss / max(epoch_vars, 1), train_acc, valid_acc)
        )
        if valid_acc > best_valid:
            best_valid = valid_acc
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
        if epoch % 25 == 0 or epoch == tcfg.epochs:
            log.info(
                "epoch %d: loss %.4f train %.3f valid %.3f",
                epoch, rows[-1].loss, train_acc, valid_acc,
            )

    model.params = best_params
    return TrainingLog(rows, best_epoch, best_valid)
