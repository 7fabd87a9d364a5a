"""Architecture description: kernel decompositions, presets and ablation toggles."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigError


class LkaSpec(BaseModel):
    """Decomposition of a k×k kernel into a×a depthwise, b×b depthwise dilated by d, and 1×1."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    k: int = Field(gt=0)
    d: int = Field(gt=0)
    a: int = Field(gt=0)
    b: int = Field(gt=0)

    @model_validator(mode="after")
    def _check_decomposition(self) -> LkaSpec:
        if self.a != 2 * self.d - 1:
            raise ValueError(f"depthwise kernel a={self.a} must equal 2d-1={2 * self.d - 1}")
        if self.b % 2 == 0:
            raise ValueError(f"dilated kernel b={self.b} must be odd")
        return self

    @property
    def gate_kernel(self) -> int:
        return self.a

    @property
    def receptive_field(self) -> int:
        return self.a + self.d * (self.b - 1)

    @property
    def label(self) -> str:
        return f"{self.a}-{self.b}-1"


LKA_7 = LkaSpec(k=7, d=2, a=3, b=5)
LKA_21 = LkaSpec(k=21, d=3, a=5, b=7)
LKA_35 = LkaSpec(k=35, d=4, a=7, b=9)
PRESET_SPECS = (LKA_7, LKA_21, LKA_35)

Variant = Literal["tiny", "light", "classical", "custom"]

PRESETS: dict[str, tuple[int, int]] = {
    "tiny": (5, 48),
    "light": (24, 60),
    "classical": (36, 180),
}

def split_widths(width: int, n: int) -> tuple[int, ...]:
    base = width // n
    return (base,) * (n - 1) + (width - base * (n - 1),)


# expansion ratio of the hidden layer for the feed-forward ablations
FFN_EXPANSION = {"mlp": 2, "sg": 2, "cff": 3}


class ManConfig(BaseModel):
    """Full description of one MAN network. Identical configs build identical parameter sets."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: Variant = "custom"
    n_blocks: int = Field(gt=0)
    width: int = Field(gt=0)
    scale: Literal[2, 3, 4] = 4
    groups: tuple[LkaSpec, ...] = PRESET_SPECS
    block_style: Literal["metaformer", "rcan"] = "metaformer"
    ffn: Literal["gsau", "mlp", "sg", "cff"] = "gsau"
    attention: Literal["mlka_all", "lka_single", "mlka_subset"] = "mlka_all"
    attention_groups: tuple[int, ...] = ()
    tail: Literal["lkat", "conv3x3"] = "lkat"
    tail_spec: LkaSpec = LKA_35
    gsau_dw_kernel: int = Field(default=7, gt=0)
    cff_dw_kernel: int = Field(default=5, gt=0)
    ffn_expansion: int | None = Field(default=None, gt=0)
    mode: Literal["default", "strict"] = "default"
    layer_scale_init: float = 1e-2

    @model_validator(mode="after")
    def _check_consistency(self) -> ManConfig:
        if not self.groups:
            raise ValueError("at least one LKA group is required")
        if self.gsau_dw_kernel % 2 == 0 or self.cff_dw_kernel % 2 == 0:
            raise ValueError("depthwise kernels must be odd")
        for index in self.attention_groups:
            if not 0 <= index < len(self.groups):
                raise ValueError(f"attention group index {index} out of range for {len(self.groups)} groups")
        if len(set(self.attention_groups)) != len(self.attention_groups):
            raise ValueError("attention_groups contains duplicates")
        if self.attention == "lka_single" and len(self.attention_groups) > 1:
            raise ValueError("lka_single takes at most one attention group")
        if self.attention == "mlka_subset" and not self.attention_groups:
            raise ValueError("mlka_subset needs a non-empty attention_groups")
        n = len(self.attention_specs)
        if self.width < n:
            raise ValueError(f"width {self.width} is smaller than {n} attention groups")
        if self.block_style == "rcan" and self.width % 2:
            raise ValueError("rcan block style needs an even width")
        if self.ffn == "sg" and (self.hidden_width % 2):
            raise ValueError("simple-gate hidden width must be even")
        return self

    @property
    def attention_specs(self) -> tuple[LkaSpec, ...]:
        """The LKA decompositions used inside each block's attention, in channel-split order."""
        if self.attention == "mlka_all":
            return self.groups
        if self.attention == "mlka_subset":
            return tuple(self.groups[i] for i in self.attention_groups)
        if self.attention_groups:
            return (self.groups[self.attention_groups[0]],)
        # single-LKA ablation defaults to the middle (5-7-1) decomposition
        return (self.groups[len(self.groups) // 2],)

    @property
    def attention_widths(self) -> tuple[int, ...]:
        """Channels per attention group: floor(width / n) each, the last group takes the remainder."""
        return split_widths(self.width, len(self.attention_specs))

    @property
    def hidden_width(self) -> int:
        expansion = self.ffn_expansion or FFN_EXPANSION.get(self.ffn, 1)
        return self.width * expansion

    @property
    def activations(self) -> bool:
        return self.mode == "default"

    @classmethod
    def create(cls, **fields: Any) -> ManConfig:
        """Validate fields into a config, reporting problems as ConfigError."""
        try:
            return cls.model_validate(fields)
        except ValidationError as e:
            raise ConfigError(f"invalid model config: {e}") from e

    @classmethod
    def preset(cls, variant: str, scale: int = 4, **overrides: Any) -> ManConfig:
        if variant not in PRESETS:
            raise ConfigError(f"unknown variant {variant!r}; expected one of {sorted(PRESETS)}")
        n_blocks, width = PRESETS[variant]
        return cls.create(**{"variant": variant, "n_blocks": n_blocks, "width": width, "scale": scale, **overrides})

    @classmethod
    def from_json(cls, text: str) -> ManConfig:
        try:
            return cls.model_validate_json(text)
        except ValidationError as e:
            raise ConfigError(f"invalid model config: {e}") from e

    def replace(self, **overrides: Any) -> ManConfig:
        return self.create(**{**self.model_dump(), **overrides})
