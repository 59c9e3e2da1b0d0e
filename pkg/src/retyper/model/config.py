"""Model and training hyperparameter containers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    vocab_size: int = 512
    n_types: int = 64
    max_seq_len: int = 256
    mask_penalty: float = 4.0  # λ; 0 disables the soft size mask
    use_layout: bool = True
    seed: int = 0

    def __post_init__(self):
        dims = {
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "d_ff": self.d_ff,
            "vocab_size": self.vocab_size,
            "n_types": self.n_types,
            "max_seq_len": self.max_seq_len,
        }
        for name, v in dims.items():
            if v <= 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if self.d_model % self.n_heads:
            raise ValueError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if self.mask_penalty < 0:
            raise ValueError(f"mask_penalty must be >= 0, got {self.mask_penalty}")

    def to_obj(self) -> dict:
        return {
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "d_ff": self.d_ff,
            "vocab_size": self.vocab_size,
            "n_types": self.n_types,
            "max_seq_len": self.max_seq_len,
            "mask_penalty": self.mask_penalty,
            "use_layout": self.use_layout,
            "seed": self.seed,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    clip_norm: float = 1.0
    batch_size: Optional[int] = None  # None = full batch, one step per epoch

    def __post_init__(self):
        if self.epochs <= 0:
            raise ValueError("epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.batch_size is not None and self.batch_size <= 0:
            raise ValueError("batch_size must be positive when set")
