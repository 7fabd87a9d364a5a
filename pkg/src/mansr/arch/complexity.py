"""Parameter and multiply-accumulate counters.

Counts walk the layout inventory, so they never need a built model. One
multiply-accumulate of a convolution weight is one MAdd; bias adds and
parameter-free element-wise ops are tallied separately and are not part of the
headline MAdds figure. The network runs at LR resolution until the final
pixel shuffle, so every op is counted over (out_h // s) × (out_w // s) pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import pandas as pd

from ..errors import ConfigError
from .config import ManConfig
from .layout import ConvLayout, ElementwiseLayout, VectorLayout, component_of
from .network import model_layout

COMPONENTS = ("head", "blocks", "tail", "reconstruction")


def _lr_pixels(config: ManConfig, out_h: int, out_w: int) -> int:
    if out_h <= 0 or out_w <= 0:
        raise ConfigError(f"output size must be positive, got {out_h}×{out_w}")
    return (out_h // config.scale) * (out_w // config.scale)


def count_params(config: ManConfig) -> int:
    """Exact trainable scalar count: conv weights and biases, LN affine and layer scales."""
    return sum(
        layout.params for layout in model_layout(config) if isinstance(layout, (ConvLayout, VectorLayout))
    )


def count_madds(config: ManConfig, out_h: int, out_w: int) -> int:
    """Convolution multiply-accumulates for one forward pass producing an out_h × out_w image."""
    per_pixel = sum(layout.madds_per_pixel for layout in model_layout(config) if isinstance(layout, ConvLayout))
    return per_pixel * _lr_pixels(config, out_h, out_w)


@dataclass
class ComplexityReport:
    config: ManConfig
    out_h: int
    out_w: int
    frame: pd.DataFrame

    @property
    def params(self) -> int:
        return int(self.frame["params"].sum())

    @property
    def madds(self) -> int:
        return int(self.frame["madds"].sum())

    @property
    def bias_adds(self) -> int:
        return int(self.frame["bias_adds"].sum())

    @property
    def elementwise(self) -> int:
        return int(self.frame["elementwise"].sum())


def complexity_report(config: ManConfig, out_h: int, out_w: int) -> ComplexityReport:
    """Per-component breakdown (head, blocks, tail, reconstruction)."""
    pixels = _lr_pixels(config, out_h, out_w)
    totals = {name: {"params": 0, "madds": 0, "bias_adds": 0, "elementwise": 0} for name in COMPONENTS}
    for layout in model_layout(config):
        row = totals.setdefault(component_of(layout.name), {"params": 0, "madds": 0, "bias_adds": 0, "elementwise": 0})
        if isinstance(layout, ConvLayout):
            row["params"] += layout.params
            row["madds"] += layout.madds_per_pixel * pixels
            row["bias_adds"] += layout.bias_adds_per_pixel * pixels
        elif isinstance(layout, VectorLayout):
            row["params"] += layout.params
        elif isinstance(layout, ElementwiseLayout):
            row["elementwise"] += layout.channels * pixels
    frame = pd.DataFrame.from_dict(totals, orient="index")
    frame.index.name = "component"
    return ComplexityReport(config, out_h, out_w, frame)
