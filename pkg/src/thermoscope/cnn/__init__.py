from .checkpoint import load_checkpoint, save_checkpoint
from .model import AdamState, CnnConfig, CnnModel, adam_step, mse_loss
from .training import TrainConfig, TrainResult, predict, train

__all__ = [
    "AdamState", "CnnConfig", "CnnModel", "TrainConfig", "TrainResult",
    "adam_step", "load_checkpoint", "mse_loss", "predict", "save_checkpoint", "train",
]
