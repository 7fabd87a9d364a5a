"""Bicubic resampling with the reference imresize semantics.

Cubic convolution kernel with a = -0.5. On downscale the kernel is stretched by
1/scale (antialiasing), borders are mirrored, and the dimension with the
smaller scale factor is resampled first.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError

CUBIC_A = -0.5


def cubic(x: np.ndarray, a: float = CUBIC_A) -> np.ndarray:
    ax = np.abs(x)
    ax2, ax3 = ax * ax, ax * ax * ax
    near = (a + 2.0) * ax3 - (a + 3.0) * ax2 + 1.0
    far = a * ax3 - 5.0 * a * ax2 + 8.0 * a * ax - 4.0 * a
    return np.where(ax <= 1.0, near, np.where(ax < 2.0, far, 0.0))


def contributions(in_len: int, out_len: int, antialias: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Source indices and normalized weights, each (out_len, taps), for one axis."""
    scale = out_len / in_len
    stretch = antialias and scale < 1.0
    kernel_width = 4.0 / scale if stretch else 4.0

    x = np.arange(1, out_len + 1, dtype=np.float64)
    u = x / scale + 0.5 * (1.0 - 1.0 / scale)
    left = np.floor(u - kernel_width / 2.0)
    taps = int(np.ceil(kernel_width)) + 2
    indices = left[:, None] + np.arange(taps, dtype=np.float64)[None, :]
    distance = u[:, None] - indices
    weights = scale * cubic(scale * distance) if stretch else cubic(distance)
    weights /= weights.sum(axis=1, keepdims=True)

    mirror = np.concatenate([np.arange(in_len), np.arange(in_len - 1, -1, -1)])
    indices = mirror[np.mod(indices.astype(np.int64) - 1, 2 * in_len)]

    keep = np.any(weights != 0.0, axis=0)
    return indices[:, keep], weights[:, keep]


def _resize_axis(img: np.ndarray, axis: int, out_len: int, antialias: bool) -> np.ndarray:
    indices, weights = contributions(img.shape[axis], out_len, antialias)
    gathered = np.take(img, indices, axis=axis)  # axis expands to (out_len, taps)
    shape = [1] * gathered.ndim
    shape[axis], shape[axis + 1] = weights.shape
    return (gathered * weights.reshape(shape)).sum(axis=axis + 1)


def bicubic_resize(img: np.ndarray, out_h: int, out_w: int, antialias: bool = True) -> np.ndarray:
    """Resample a (c, h, w) image in [0, 1] to (c, out_h, out_w); output is clamped to [0, 1]."""
    if out_h <= 0 or out_w <= 0:
        raise DataError(f"resize target must be positive, got {out_h}×{out_w}")
    if img.ndim != 3:
        raise DataError(f"expected a (c, h, w) image, got shape {img.shape}")
    _, h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()

    out = img.astype(np.float64)
    steps = [(1, out_h, out_h / h), (2, out_w, out_w / w)]
    for axis, length, _ in sorted(steps, key=lambda step: step[2]):
        if out.shape[axis] != length:
            out = _resize_axis(out, axis, length, antialias)
    return np.clip(out, 0.0, 1.0).astype(img.dtype)
