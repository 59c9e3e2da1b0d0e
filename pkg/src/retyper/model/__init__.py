from .checkpoint import load_checkpoint, save_checkpoint
from .config import ModelConfig, TrainConfig
from .core import RetyperModel, new_model
from .gradcheck import gradient_check
from .train import TrainingLog, train_model

__all__ = [
    "ModelConfig",
    "TrainConfig",
    "RetyperModel",
    "new_model",
    "train_model",
    "TrainingLog",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
]
