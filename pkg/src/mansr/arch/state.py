"""Named parameter store of a built network."""

from __future__ import annotations

from collections.abc import Iterator, Mapping

import numpy as np
from scipy.stats import truncnorm

from ..errors import ShapeError
from ..tensor import ConvParams, Tensor
from .config import ManConfig
from .layout import ConvLayout, VectorLayout, join

INIT_STD = 0.02


def init_conv(layout: ConvLayout, rng: np.random.Generator, dtype=np.float32) -> dict[str, Tensor]:
    """Truncated normal (±2σ) weights and zero biases."""
    weight = truncnorm.rvs(-2.0, 2.0, scale=INIT_STD, size=layout.weight_shape, random_state=rng)
    params = {join(layout.name, "weight"): Tensor(weight.astype(dtype), requires_grad=True)}
    if layout.bias:
        params[join(layout.name, "bias")] = Tensor(np.zeros(layout.c_out, dtype=dtype), requires_grad=True)
    return params


def init_vector(layout: VectorLayout, layer_scale: float, dtype=np.float32) -> Tensor:
    value = {"ones": 1.0, "zeros": 0.0, "layer_scale": layer_scale}[layout.init]
    return Tensor(np.full(layout.length, value, dtype=dtype), requires_grad=True)


class ModelState:
    """Parameter path → Tensor map plus the config that determines it."""

    def __init__(self, config: ManConfig, params: Mapping[str, Tensor]):
        self.config = config
        self.params: dict[str, Tensor] = dict(params)
        for name, tensor in self.params.items():
            tensor.name = name

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self.params[name]
        except KeyError:
            raise ShapeError(f"model has no parameter {name!r}") from None

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def items(self):
        return self.params.items()

    @property
    def num_params(self) -> int:
        return sum(t.size for t in self.params.values())

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.params.values())).dtype

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {name: t.shape for name, t in self.params.items()}

    def scope(self, prefix: str = "") -> ParamScope:
        return ParamScope(self.params, prefix)

    def copy(self) -> ModelState:
        return ModelState(
            self.config, {name: Tensor(t.data.copy(), requires_grad=t.requires_grad) for name, t in self.params.items()}
        )

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()


class ParamScope:
    """View of the parameters under one path prefix, e.g. ``blocks.3``."""

    def __init__(self, params: Mapping[str, Tensor], prefix: str = ""):
        self._params = params
        self.prefix = prefix

    def __getitem__(self, name: str) -> Tensor:
        path = join(self.prefix, name)
        if path not in self._params:
            raise ShapeError(f"missing parameter {path!r}")
        return self._params[path]

    def __contains__(self, name: str) -> bool:
        return join(self.prefix, name) in self._params

    def child(self, name: str) -> ParamScope:
        """Scope one level deeper, e.g. ``blocks.0`` → ``blocks.0.mlka``."""
        return ParamScope(self._params, join(self.prefix, name))

    def conv(self, name: str, dilation: int = 1, groups: int = 1, kernel: int | None = None) -> ConvParams:
        """Weight and bias under ``name`` as conv parameters; ``kernel`` checks the stored size."""
        weight = self[f"{name}.weight"]
        if kernel is not None and weight.ndim == 4 and weight.shape[-1] != kernel:
            raise ShapeError(
                f"{join(self.prefix, name)} has a {weight.shape[-1]}×{weight.shape[-1]} kernel, expected {kernel}×{kernel}"
            )
        bias = self[f"{name}.bias"] if f"{name}.bias" in self else None
        return ConvParams(weight, bias, dilation=dilation, groups=groups)
