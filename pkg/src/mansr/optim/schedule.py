"""Cosine annealing learning-rate schedule."""

import math

from ..errors import ConfigError

LR_MIN = 1e-7


def cosine_lr(t: int, total: int, lr0: float, lr_min: float = LR_MIN) -> float:
    if t < 0 or t > total:
        raise ConfigError(f"schedule step {t} outside [0, {total}]")
    if total == 0:
        return lr0
    return lr_min + (lr0 - lr_min) * (1.0 + math.cos(math.pi * t / total)) / 2.0
