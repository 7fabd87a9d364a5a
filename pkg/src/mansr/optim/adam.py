"""Adam with bias correction."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..errors import TapeError
from ..tensor import Tensor

BETA1 = 0.9
BETA2 = 0.99
EPS = 1e-8


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPS

    @classmethod
    def for_params(cls, params: Mapping[str, Tensor]) -> AdamState:
        return cls(
            m={name: np.zeros_like(t.data) for name, t in params.items()},
            v={name: np.zeros_like(t.data) for name, t in params.items()},
        )


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray | None],
    state: AdamState,
    lr: float,
) -> None:
    """One in-place Adam update of every parameter."""
    missing = [name for name in params if grads.get(name) is None]
    if missing:
        raise TapeError(f"no gradient for parameter {missing[0]!r}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**t
    correction2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name]
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype, copy=False)


def clip_grad_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values())))
    if total > max_norm > 0:
        factor = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= factor
    return total
