from .adam import AdamState, adam_step, clip_grad_norm
from .schedule import LR_MIN, cosine_lr
from .trainer import TRAIN_PRESETS, LossLog, TrainConfig, train
from .weights import (
    Checkpoint,
    load_checkpoint,
    load_config,
    load_weights,
    save_checkpoint,
    save_weights,
    sidecar_path,
)

__all__ = [
    "AdamState",
    "adam_step",
    "clip_grad_norm",
    "LR_MIN",
    "cosine_lr",
    "TRAIN_PRESETS",
    "LossLog",
    "TrainConfig",
    "train",
    "Checkpoint",
    "load_checkpoint",
    "load_config",
    "load_weights",
    "save_checkpoint",
    "save_weights",
    "sidecar_path",
]
