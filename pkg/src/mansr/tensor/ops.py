"""Forward/backward operator set for the network.

Backward rules are module-level functions with the signature
``name_backward(grad_out, *saved)`` so each rule can be read, tested and
replaced on its own. Convolution is computed directly: a fixed row-major loop
over kernel taps with a channel-blocked matmul (or a broadcast multiply for
depthwise layers) per tap.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from ..errors import ShapeError
from .core import Tensor, get_num_threads, parallel_map, record

LAYER_NORM_EPS = 1e-6
_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _require_4d(x: Tensor, op: str) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{op} expects an (n, c, h, w) tensor, got shape {x.shape}")


def _require_same_shape(x: Tensor, y: Tensor, op: str) -> None:
    if x.shape != y.shape:
        raise ShapeError(f"{op} shape mismatch: {x.shape} vs {y.shape}")


def _batch_slices(n: int) -> list[slice]:
    parts = min(n, get_num_threads())
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


@dataclass(frozen=True)
class ConvParams:
    """Weights and geometry of one stride-1, "same"-padded convolution."""

    weight: Tensor
    bias: Tensor | None = None
    dilation: int = 1
    groups: int = 1
    padding: str = "same"

    def __post_init__(self):
        if self.weight.ndim != 4 or self.weight.shape[2] != self.weight.shape[3]:
            raise ShapeError(f"conv weight must be (c_out, c_in/groups, k, k), got {self.weight.shape}")
        if self.padding != "same":
            raise ShapeError(f"only 'same' padding is supported, got {self.padding!r}")
        if self.dilation < 1 or self.groups < 1:
            raise ShapeError(f"dilation and groups must be positive, got {self.dilation}, {self.groups}")
        if self.c_out % self.groups:
            raise ShapeError(f"c_out={self.c_out} is not divisible by groups={self.groups}")
        if self.extent % 2 == 0:
            raise ShapeError(f"effective kernel extent {self.extent} is even; 'same' padding needs it odd")
        if self.bias is not None and self.bias.shape != (self.c_out,):
            raise ShapeError(f"bias shape {self.bias.shape} does not match c_out={self.c_out}")

    @property
    def c_out(self) -> int:
        return self.weight.shape[0]

    @property
    def c_in(self) -> int:
        return self.weight.shape[1] * self.groups

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]

    @property
    def extent(self) -> int:
        return (self.kernel - 1) * self.dilation + 1


def _pad_same(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _conv_forward(x: np.ndarray, w: np.ndarray, dilation: int, groups: int) -> np.ndarray:
    n, _, h, width = x.shape
    c_out, cig, k, _ = w.shape
    cog = c_out // groups
    pad = (k - 1) * dilation // 2
    xp = _pad_same(x, pad)
    hp, wp = xp.shape[2], xp.shape[3]
    wg = w.reshape(groups, cog, cig, k, k)
    out = np.empty((n, c_out, h, width), dtype=np.result_type(x, w))

    def run(part: slice) -> None:
        xs = xp[part].reshape(-1, groups, cig, hp, wp)
        acc = np.zeros((xs.shape[0], groups, cog, h, width), dtype=out.dtype)
        for ky in range(k):
            oy = ky * dilation
            for kx in range(k):
                ox = kx * dilation
                patch = xs[:, :, :, oy:oy + h, ox:ox + width]
                tap = wg[:, :, :, ky, kx]
                if cig == 1:
                    acc += tap[None, :, :, 0, None, None] * patch
                else:
                    flat = patch.reshape(xs.shape[0], groups, cig, h * width)
                    acc += np.matmul(tap, flat).reshape(acc.shape)
        out[part] = acc.reshape(-1, c_out, h, width)

    parts = _batch_slices(n)
    parallel_map(lambda i: run(parts[i]), len(parts))
    return out


def _conv_backward(
    grad: np.ndarray, x: np.ndarray, w: np.ndarray, dilation: int, groups: int
) -> tuple[np.ndarray, np.ndarray]:
    n, c_in, h, width = x.shape
    c_out, cig, k, _ = w.shape
    cog = c_out // groups
    pad = (k - 1) * dilation // 2
    xp = _pad_same(x, pad)
    hp, wp = xp.shape[2], xp.shape[3]
    wg = w.reshape(groups, cog, cig, k, k)
    grad_x = np.empty(x.shape, dtype=np.result_type(grad, w))

    def run(part: slice) -> np.ndarray:
        xs = xp[part].reshape(-1, groups, cig, hp, wp)
        gs = grad[part].reshape(-1, groups, cog, h, width)
        nb = xs.shape[0]
        gxp = np.zeros_like(xs, dtype=grad_x.dtype)
        gw = np.zeros((groups, cog, cig, k, k), dtype=grad_x.dtype)
        gflat = gs.reshape(nb, groups, cog, h * width)
        for ky in range(k):
            oy = ky * dilation
            for kx in range(k):
                ox = kx * dilation
                patch = xs[:, :, :, oy:oy + h, ox:ox + width]
                tap = wg[:, :, :, ky, kx]
                if cig == 1:
                    gw[:, :, 0, ky, kx] = np.sum(gs * patch, axis=(0, 3, 4))
                    gxp[:, :, :, oy:oy + h, ox:ox + width] += np.sum(
                        gs * tap[None, :, :, 0, None, None], axis=2, keepdims=True
                    )
                else:
                    pflat = patch.reshape(nb, groups, cig, h * width)
                    gw[:, :, :, ky, kx] = np.matmul(gflat, pflat.transpose(0, 1, 3, 2)).sum(axis=0)
                    gxp[:, :, :, oy:oy + h, ox:ox + width] += np.matmul(
                        tap.transpose(0, 2, 1), gflat
                    ).reshape(nb, groups, cig, h, width)
        gxp = gxp.reshape(nb, c_in, hp, wp)
        grad_x[part] = gxp[:, :, pad:pad + h, pad:pad + width]
        return gw

    parts = _batch_slices(n)
    partial_gw = parallel_map(lambda i: run(parts[i]), len(parts))
    grad_w = partial_gw[0]
    for extra in partial_gw[1:]:
        grad_w = grad_w + extra
    return grad_x, grad_w.reshape(w.shape)


def conv2d_backward(
    grad: np.ndarray, x: Tensor, p: ConvParams
) -> tuple[np.ndarray | None, np.ndarray | None, np.ndarray | None]:
    grad_x, grad_w = _conv_backward(grad, x.data, p.weight.data, p.dilation, p.groups)
    grad_b = grad.sum(axis=(0, 2, 3)) if p.bias is not None else None
    return grad_x, grad_w, grad_b


def conv2d(x: Tensor, p: ConvParams) -> Tensor:
    """Stride-1 cross-correlation with symmetric zero "same" padding."""
    _require_4d(x, "conv2d")
    if x.shape[1] != p.c_in:
        raise ShapeError(f"conv2d expects {p.c_in} input channels, got {x.shape[1]}")
    out = _conv_forward(x.data, p.weight.data, p.dilation, p.groups)
    if p.bias is not None:
        out += p.bias.data[None, :, None, None]
    inputs = (x, p.weight) + ((p.bias,) if p.bias is not None else ())

    def backward(grad: np.ndarray):
        grads = conv2d_backward(grad, x, p)
        return grads if p.bias is not None else grads[:2]

    return record("conv2d", inputs, out, backward)


def layer_norm_backward(
    grad: np.ndarray, xhat: np.ndarray, inv_std: np.ndarray, gamma: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    dxhat = grad * gamma[None, :, None, None]
    mean_dxhat = dxhat.mean(axis=1, keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=1, keepdims=True)
    grad_x = inv_std * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    grad_gamma = (grad * xhat).sum(axis=(0, 2, 3))
    grad_beta = grad.sum(axis=(0, 2, 3))
    return grad_x, grad_gamma, grad_beta


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize each (n, h, w) position across channels, then scale and shift."""
    _require_4d(x, "layer_norm")
    c = x.shape[1]
    if c == 0:
        raise ShapeError("layer_norm needs at least one channel")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"layer_norm affine shapes {gamma.shape}/{beta.shape} do not match c={c}")
    mean = x.data.mean(axis=1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]
    return record(
        "layer_norm",
        (x, gamma, beta),
        out,
        lambda grad: layer_norm_backward(grad, xhat, inv_std, gamma.data),
    )


def gelu_backward(grad: np.ndarray, x: np.ndarray) -> tuple[np.ndarray]:
    cdf = 0.5 * (1.0 + erf(x / _SQRT_2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return (grad * (cdf + x * pdf),)


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit, exact erf form."""
    out = 0.5 * x.data * (1.0 + erf(x.data / _SQRT_2))
    return record("gelu", (x,), out.astype(x.dtype, copy=False), lambda grad: gelu_backward(grad, x.data))


def mul_backward(grad: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return grad * y, grad * x


def mul(x: Tensor, y: Tensor) -> Tensor:
    """Elementwise product of two same-shaped tensors (the gating op)."""
    _require_same_shape(x, y, "mul")
    return record("mul", (x, y), x.data * y.data, lambda grad: mul_backward(grad, x.data, y.data))


def add_backward(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return grad, grad


def add(x: Tensor, y: Tensor) -> Tensor:
    """Elementwise sum of two same-shaped tensors."""
    _require_same_shape(x, y, "add")
    return record("add", (x, y), x.data + y.data, add_backward)


def channel_scale_backward(
    grad: np.ndarray, x: np.ndarray, scale: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    return grad * scale[None, :, None, None], (grad * x).sum(axis=(0, 2, 3))


def channel_scale(x: Tensor, scale: Tensor) -> Tensor:
    """Multiply every channel by its own learnable scalar."""
    _require_4d(x, "channel_scale")
    if scale.shape != (x.shape[1],):
        raise ShapeError(f"channel_scale length {scale.shape} does not match c={x.shape[1]}")
    out = x.data * scale.data[None, :, None, None]
    return record("channel_scale", (x, scale), out, lambda grad: channel_scale_backward(grad, x.data, scale.data))


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    """Channels ``start:stop`` as a new tensor; the gradient scatters back into a zero array."""
    _require_4d(x, "slice_channels")
    if not 0 <= start < stop <= x.shape[1]:
        raise ShapeError(f"channel slice [{start}:{stop}] out of range for c={x.shape[1]}")

    def backward(grad: np.ndarray):
        full = np.zeros(x.shape, dtype=grad.dtype)
        full[:, start:stop] = grad
        return (full,)

    return record("slice_channels", (x,), x.data[:, start:stop].copy(), backward)


def split_channels(x: Tensor, sizes: Sequence[int]) -> list[Tensor]:
    """Consecutive channel groups of the given sizes, in order."""
    if sum(sizes) != x.shape[1]:
        raise ShapeError(f"split sizes {list(sizes)} do not add up to c={x.shape[1]}")
    bounds = np.cumsum([0, *sizes])
    return [slice_channels(x, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def concat_channels(xs: Sequence[Tensor]) -> Tensor:
    """Join tensors along the channel axis; inverse of ``split_channels``."""
    for x in xs:
        _require_4d(x, "concat_channels")
    if len({(x.shape[0],) + x.shape[2:] for x in xs}) != 1:
        raise ShapeError(f"concat_channels shape mismatch: {[x.shape for x in xs]}")
    bounds = np.cumsum([0, *(x.shape[1] for x in xs)])

    def backward(grad: np.ndarray):
        return tuple(grad[:, a:b] for a, b in zip(bounds[:-1], bounds[1:]))

    return record("concat_channels", tuple(xs), np.concatenate([x.data for x in xs], axis=1), backward)


def _shuffle(data: np.ndarray, r: int) -> np.ndarray:
    n, c, h, w = data.shape
    out = data.reshape(n, c // (r * r), r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return out.reshape(n, c // (r * r), h * r, w * r)


def _unshuffle(data: np.ndarray, r: int) -> np.ndarray:
    n, c, h, w = data.shape
    out = data.reshape(n, c, h // r, r, w // r, r).transpose(0, 1, 3, 5, 2, 4)
    return out.reshape(n, c * r * r, h // r, w // r)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Sub-pixel rearrangement: channel c·r²+i·r+j moves to spatial offset (i, j)."""
    _require_4d(x, "pixel_shuffle")
    if r < 1 or x.shape[1] % (r * r):
        raise ShapeError(f"pixel_shuffle needs c divisible by r²={r * r}, got c={x.shape[1]}")
    return record(
        "pixel_shuffle", (x,), _shuffle(x.data, r).copy(), lambda grad: (_unshuffle(grad, r).copy(),)
    )


def tensor_sum(x: Tensor) -> Tensor:
    """Sum of all elements as a 0-d tensor."""
    return record(
        "sum", (x,), np.asarray(x.data.sum(), dtype=x.dtype), lambda grad: (np.full(x.shape, grad, dtype=x.dtype),)
    )


def l1_loss_backward(grad: np.ndarray, diff: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    g = grad * np.sign(diff) / diff.size
    return g, -g


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute deviation over every element."""
    _require_same_shape(pred, target, "l1_loss")
    diff = pred.data - target.data
    out = np.asarray(np.abs(diff).mean(), dtype=pred.dtype)
    return record("l1_loss", (pred, target), out, lambda grad: l1_loss_backward(grad, diff))
