"""Full network assembly: shallow feature conv, block stack, tail, long residual, sub-pixel reconstruction."""

from __future__ import annotations

import numpy as np
import structlog

from ..errors import ShapeError
from ..tensor import Tensor, add, conv2d, pixel_shuffle, precision
from .blocks import block_forward, block_layout, lkat_layout, tail_forward
from .config import ManConfig
from .layout import ConvLayout, ElementwiseLayout, Layout, VectorLayout
from .state import ModelState, init_conv, init_vector

log = structlog.get_logger()

IMAGE_CHANNELS = 3


def model_layout(config: ManConfig) -> list[Layout]:
    """Every parameter and op of the network in forward order."""
    c, s = config.width, config.scale
    layouts: list[Layout] = [ConvLayout("sf", IMAGE_CHANNELS, c, 3)]
    for i in range(config.n_blocks):
        layouts += block_layout(f"blocks.{i}", config)
    layouts += lkat_layout("tail", config)
    layouts.append(ElementwiseLayout("long_residual", c))
    layouts.append(ConvLayout("recon", c, IMAGE_CHANNELS * s * s, 3))
    return layouts


def param_shapes(config: ManConfig) -> dict[str, tuple[int, ...]]:
    """Parameter path → shape, in build order, without allocating anything."""
    shapes: dict[str, tuple[int, ...]] = {}
    for layout in model_layout(config):
        if isinstance(layout, ConvLayout):
            shapes[f"{layout.name}.weight"] = layout.weight_shape
            if layout.bias:
                shapes[f"{layout.name}.bias"] = (layout.c_out,)
        elif isinstance(layout, VectorLayout):
            shapes[layout.name] = (layout.length,)
    return shapes


def build_model(config: ManConfig, seed: int = 0, dtype: str = "float32") -> ModelState:
    """Allocate and initialize every parameter; deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    np_dtype = np.float64 if dtype == "float64" else np.float32
    params: dict[str, Tensor] = {}
    for layout in model_layout(config):
        if isinstance(layout, ConvLayout):
            params.update(init_conv(layout, rng, np_dtype))
        elif isinstance(layout, VectorLayout):
            params[layout.name] = init_vector(layout, config.layer_scale_init, np_dtype)
    state = ModelState(config, params)
    log.debug("model built", variant=config.variant, scale=config.scale, params=state.num_params, seed=seed)
    return state


def _as_batch(lr: Tensor | np.ndarray) -> tuple[Tensor, bool]:
    if isinstance(lr, np.ndarray):
        lr = Tensor(lr)
    if lr.ndim == 3:
        return Tensor(lr.data[None]), True
    if lr.ndim != 4:
        raise ShapeError(f"expected a (3, h, w) image or (n, 3, h, w) batch, got shape {lr.shape}")
    return lr, False


def man_forward(lr: Tensor | np.ndarray, state: ModelState) -> Tensor:
    """Super-resolve a (3, h, w) image or an (n, 3, h, w) batch by the configured scale."""
    config = state.config
    x, single = _as_batch(lr)
    if x.shape[1] != IMAGE_CHANNELS:
        raise ShapeError(f"expected {IMAGE_CHANNELS} input channels, got {x.shape[1]}")
    if x.shape[2] <= 0 or x.shape[3] <= 0:
        raise ShapeError(f"input spatial dims must be positive, got {x.shape[2:]}")
    params = state.scope()
    shallow = conv2d(x, params.conv("sf"))
    h = shallow
    for i in range(config.n_blocks):
        h = block_forward(h, config, params.child(f"blocks.{i}"))
    h = add(tail_forward(h, config, params.child("tail")), shallow)
    sr = pixel_shuffle(conv2d(h, params.conv("recon")), config.scale)
    return Tensor(sr.data[0]) if single else sr


class SuperResolver:
    """Inference wrapper: (3, h, w) float array in [0, 1] → (3, s·h, s·w) float array."""

    def __init__(self, state: ModelState):
        self.state = state

    @property
    def scale(self) -> int:
        return self.state.config.scale

    @property
    def name(self) -> str:
        return f"man-{self.state.config.variant}-x{self.scale}"

    def __call__(self, lr: np.ndarray) -> np.ndarray:
        with precision(str(self.state.dtype)):
            return man_forward(lr.astype(self.state.dtype, copy=False), self.state).data
