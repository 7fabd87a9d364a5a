"""MAN building blocks: LKA, MLKA, GSAU, feed-forward ablations, MAB, RCAN-style block and LKAT.

Each forward takes a ``ParamScope`` rooted at the block; the matching ``*_layout``
function lists the parameters (and parameter-free ops) the forward expects under
that prefix, so building and counting never drift apart from the forward code.
"""

from __future__ import annotations

from ..errors import ShapeError
from ..tensor import (
    Tensor,
    add,
    channel_scale,
    concat_channels,
    conv2d,
    gelu,
    layer_norm,
    mul,
    split_channels,
)
from .config import LkaSpec, ManConfig, split_widths
from .layout import ConvLayout, ElementwiseLayout, Layout, VectorLayout, join
from .state import ParamScope


def _require_width(x: Tensor, width: int, block: str) -> None:
    if x.ndim != 4 or x.shape[1] != width:
        raise ShapeError(f"{block} expects width {width}, got input shape {x.shape}")


def _maybe_gelu(x: Tensor, config: ManConfig) -> Tensor:
    return gelu(x) if config.activations else x


def lka_layout(prefix: str, channels: int, spec: LkaSpec) -> list[Layout]:
    """DW a×a, DWD b×b (dilation d), PW 1×1, all at the group's channel count."""
    return [
        ConvLayout(join(prefix, "dw"), channels, channels, spec.a, groups=channels),
        ConvLayout(join(prefix, "dwd"), channels, channels, spec.b, dilation=spec.d, groups=channels),
        ConvLayout(join(prefix, "pw"), channels, channels, 1),
    ]


def lka_forward(x: Tensor, spec: LkaSpec, params: ParamScope) -> Tensor:
    """LKA(x) = PW(DWD(DW(x))): a k×k kernel decomposed into three cheap convolutions."""
    c = x.shape[1]
    y = conv2d(x, params.conv("dw", groups=c, kernel=spec.a))
    y = conv2d(y, params.conv("dwd", dilation=spec.d, groups=c, kernel=spec.b))
    return conv2d(y, params.conv("pw", kernel=1))


def mlka_layout(prefix: str, width: int, specs: tuple[LkaSpec, ...]) -> list[Layout]:
    """One LKA plus an a×a depthwise gate per group, named ``group{j}``."""
    layouts: list[Layout] = []
    for j, (spec, cg) in enumerate(zip(specs, split_widths(width, len(specs)))):
        group = join(prefix, f"group{j}")
        layouts += lka_layout(group, cg, spec)
        layouts.append(ConvLayout(join(group, "gate"), cg, cg, spec.gate_kernel, groups=cg))
        layouts.append(ElementwiseLayout(join(group, "gate_mul"), cg))
    return layouts


def mlka_forward(x: Tensor, config: ManConfig, params: ParamScope) -> Tensor:
    """Split channels into one group per LKA spec; each group is gate(x_i) ⊗ LKA_i(x_i).

    Groups get floor(C/n) channels and the last one also takes the remainder.
    """
    _require_width(x, config.width, "mlka")
    widths = config.attention_widths
    outputs = []
    for j, (xj, spec) in enumerate(zip(split_channels(x, widths), config.attention_specs)):
        group = params.child(f"group{j}")
        gate = conv2d(xj, group.conv("gate", groups=xj.shape[1], kernel=spec.gate_kernel))
        outputs.append(mul(gate, lka_forward(xj, spec, group)))
    return outputs[0] if len(outputs) == 1 else concat_channels(outputs)


def gsau_forward(x: Tensor, y: Tensor, params: ParamScope) -> Tensor:
    """GSAU(x, y) = DW(x) ⊗ y."""
    if x.shape != y.shape:
        raise ShapeError(f"gsau inputs differ in shape: {x.shape} vs {y.shape}")
    return mul(conv2d(x, params.conv("dw", groups=x.shape[1])), y)


def ffn_layout(prefix: str, config: ManConfig) -> list[Layout]:
    """Feed-forward branch: f4/f5/GSAU/f6, or the ``ffn.*`` layers of an ablation variant."""
    c = config.width
    if config.ffn == "gsau":
        return [
            ConvLayout(join(prefix, "f4"), c, c),
            ElementwiseLayout(join(prefix, "f4_act"), c if config.activations else 0),
            ConvLayout(join(prefix, "f5"), c, c),
            ConvLayout(join(prefix, "gsau.dw"), c, c, config.gsau_dw_kernel, groups=c),
            ElementwiseLayout(join(prefix, "gsau_mul"), c),
            ConvLayout(join(prefix, "f6"), c, c),
        ]
    hidden = config.hidden_width
    ffn = join(prefix, "ffn")
    if config.ffn == "mlp":
        return [
            ConvLayout(join(ffn, "fc1"), c, hidden),
            ElementwiseLayout(join(ffn, "act"), hidden),
            ConvLayout(join(ffn, "fc2"), hidden, c),
        ]
    if config.ffn == "sg":
        return [
            ConvLayout(join(ffn, "fc1"), c, hidden),
            ElementwiseLayout(join(ffn, "gate_mul"), hidden // 2),
            ConvLayout(join(ffn, "fc2"), hidden // 2, c),
        ]
    return [
        ConvLayout(join(ffn, "fc1"), c, hidden),
        ConvLayout(join(ffn, "dw"), hidden, hidden, config.cff_dw_kernel, groups=hidden),
        ElementwiseLayout(join(ffn, "act"), hidden),
        ConvLayout(join(ffn, "fc2"), hidden, c),
    ]


def ffn_variant_forward(n: Tensor, config: ManConfig, params: ParamScope) -> Tensor:
    """Feed-forward branch of a block: GSAU or one of the MLP / simple-gate / conv-FFN ablations."""
    if config.ffn == "gsau":
        x = _maybe_gelu(conv2d(n, params.conv("f4")), config)
        y = conv2d(n, params.conv("f5"))
        return conv2d(gsau_forward(x, y, params.child("gsau")), params.conv("f6"))

    ffn = params.child("ffn")
    if config.ffn == "mlp":
        return conv2d(gelu(conv2d(n, ffn.conv("fc1"))), ffn.conv("fc2"))
    if config.ffn == "sg":
        h = conv2d(n, ffn.conv("fc1"))
        half = h.shape[1] // 2
        a, b = split_channels(h, [half, half])
        return conv2d(mul(a, b), ffn.conv("fc2"))
    if config.ffn == "cff":
        h = conv2d(n, ffn.conv("fc1"))
        h = gelu(conv2d(h, ffn.conv("dw", groups=h.shape[1])))
        return conv2d(h, ffn.conv("fc2"))
    raise ShapeError(f"unknown feed-forward variant {config.ffn!r}")


def _attention_layout(prefix: str, config: ManConfig) -> list[Layout]:
    c = config.width
    return [
        ConvLayout(join(prefix, "f1"), c, c),
        ElementwiseLayout(join(prefix, "f1_act"), c if config.activations else 0),
        ConvLayout(join(prefix, "f2"), c, c),
        *mlka_layout(join(prefix, "mlka"), c, config.attention_specs),
        ElementwiseLayout(join(prefix, "attn_mul"), c),
        ConvLayout(join(prefix, "f3"), c, c),
        VectorLayout(join(prefix, "lambda1"), c, "layer_scale"),
        ElementwiseLayout(join(prefix, "residual1"), 2 * c),
    ]


def _attention_branch(n: Tensor, config: ManConfig, params: ParamScope) -> Tensor:
    """f3(MLKA(f1(n)) ⊗ f2(n))."""
    a = _maybe_gelu(conv2d(n, params.conv("f1")), config)
    g = conv2d(n, params.conv("f2"))
    return conv2d(mul(mlka_forward(a, config, params.child("mlka")), g), params.conv("f3"))


def mab_layout(prefix: str, config: ManConfig) -> list[Layout]:
    """Two layer norms, the attention branch, the feed-forward branch and both layer scales."""
    c = config.width
    return [
        VectorLayout(join(prefix, "norm1.weight"), c, "ones"),
        VectorLayout(join(prefix, "norm1.bias"), c, "zeros"),
        ElementwiseLayout(join(prefix, "norm1"), c),
        *_attention_layout(prefix, config),
        VectorLayout(join(prefix, "norm2.weight"), c, "ones"),
        VectorLayout(join(prefix, "norm2.bias"), c, "zeros"),
        ElementwiseLayout(join(prefix, "norm2"), c),
        *ffn_layout(prefix, config),
        VectorLayout(join(prefix, "lambda2"), c, "layer_scale"),
        ElementwiseLayout(join(prefix, "residual2"), 2 * c),
    ]


def mab_forward(x: Tensor, config: ManConfig, params: ParamScope) -> Tensor:
    """Multi-scale attention block: two pre-norm residual branches with per-channel layer scale.

    x = x + λ1·f3(MLKA(f1(N)) ⊗ f2(N)),   N = LN(x)
    x = x + λ2·FFN(LN(x))
    """
    _require_width(x, config.width, "mab")
    n = layer_norm(x, params["norm1.weight"], params["norm1.bias"])
    x = add(x, channel_scale(_attention_branch(n, config, params), params["lambda1"]))
    n = layer_norm(x, params["norm2.weight"], params["norm2.bias"])
    return add(x, channel_scale(ffn_variant_forward(n, config, params), params["lambda2"]))


def rcan_layout(prefix: str, config: ManConfig) -> list[Layout]:
    c = config.width
    return [
        ConvLayout(join(prefix, "body1"), c, c // 2, 3),
        ElementwiseLayout(join(prefix, "body_act"), c // 2),
        ConvLayout(join(prefix, "body2"), c // 2, c),
        *_attention_layout(prefix, config),
    ]


def rcan_style_block_forward(x: Tensor, config: ManConfig, params: ParamScope) -> Tensor:
    """Residual block without normalization or FFN: conv-act-conv followed by MLKA attention."""
    _require_width(x, config.width, "rcan block")
    h = conv2d(gelu(conv2d(x, params.conv("body1"))), params.conv("body2"))
    return add(x, channel_scale(_attention_branch(h, config, params), params["lambda1"]))


def block_layout(prefix: str, config: ManConfig) -> list[Layout]:
    return rcan_layout(prefix, config) if config.block_style == "rcan" else mab_layout(prefix, config)


def block_forward(x: Tensor, config: ManConfig, params: ParamScope) -> Tensor:
    if config.block_style == "rcan":
        return rcan_style_block_forward(x, config, params)
    return mab_forward(x, config, params)


def lkat_layout(prefix: str, config: ManConfig) -> list[Layout]:
    c = config.width
    if config.tail == "conv3x3":
        return [ConvLayout(join(prefix, "conv"), c, c, 3)]
    return [
        ConvLayout(join(prefix, "conv0"), c, c),
        ElementwiseLayout(join(prefix, "conv0_act"), c if config.activations else 0),
        *lka_layout(join(prefix, "lka"), c, config.tail_spec),
        ElementwiseLayout(join(prefix, "attn_mul"), c),
        ConvLayout(join(prefix, "conv1"), c, c),
    ]


def lkat_forward(x: Tensor, params: ParamScope, spec: LkaSpec, activation: bool = True) -> Tensor:
    """Large-kernel attention tail: 1×1 conv → y ⊗ LKA(y) → 1×1 conv."""
    y = conv2d(x, params.conv("conv0"))
    if activation:
        y = gelu(y)
    y = mul(y, lka_forward(y, spec, params.child("lka")))
    return conv2d(y, params.conv("conv1"))


def tail_forward(x: Tensor, config: ManConfig, params: ParamScope) -> Tensor:
    _require_width(x, config.width, "tail")
    if config.tail == "conv3x3":
        return conv2d(x, params.conv("conv"))
    return lkat_forward(x, params, config.tail_spec, config.activations)
