"""Parameter and op inventory of a network, shared by model building and complexity counting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal


@dataclass(frozen=True)
class ConvLayout:
    name: str
    c_in: int
    c_out: int
    k: int = 1
    dilation: int = 1
    groups: int = 1
    bias: bool = True

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.c_out, self.c_in // self.groups, self.k, self.k)

    @property
    def params(self) -> int:
        c_out, cig, k, _ = self.weight_shape
        return c_out * cig * k * k + (c_out if self.bias else 0)

    @property
    def madds_per_pixel(self) -> int:
        c_out, cig, k, _ = self.weight_shape
        return c_out * cig * k * k

    @property
    def bias_adds_per_pixel(self) -> int:
        return self.c_out if self.bias else 0


@dataclass(frozen=True)
class VectorLayout:
    """Per-channel parameter vector: LN affine or layer scale."""

    name: str
    length: int
    init: Literal["ones", "zeros", "layer_scale"]

    @property
    def params(self) -> int:
        return self.length


@dataclass(frozen=True)
class ElementwiseLayout:
    """A parameter-free op touching ``channels`` values per pixel (mul, add, norm, activation)."""

    name: str
    channels: int


Layout = ConvLayout | VectorLayout | ElementwiseLayout


def join(prefix: str, name: str) -> str:
    return f"{prefix}.{name}" if prefix else name


COMPONENTS = {
    "sf": "head",
    "blocks": "blocks",
    "tail": "tail",
    "long_residual": "tail",
    "recon": "reconstruction",
}


def component_of(name: str) -> str:
    """Coarse network component a parameter path belongs to."""
    return COMPONENTS.get(name.split(".", 1)[0], "other")
