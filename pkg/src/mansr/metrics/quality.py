"""Y-channel conversion, PSNR and SSIM on [0, 1] images."""

from __future__ import annotations

from functools import cache

import numpy as np
from scipy.signal import convolve2d

from ..errors import DataError, ShapeError

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

_Y_WEIGHTS = np.array([65.481, 128.553, 24.966]) / 255.0
_Y_OFFSET = 16.0 / 255.0


def rgb_to_y(img: np.ndarray) -> np.ndarray:
    """BT.601 studio-swing luma of a (3, h, w) image, as (1, h, w)."""
    if img.ndim != 3 or img.shape[0] != 3:
        raise ShapeError(f"expected a (3, h, w) RGB image, got shape {img.shape}")
    y = _Y_OFFSET + np.tensordot(_Y_WEIGHTS, img.astype(np.float64), axes=(0, 0))
    return y[None]


def shave_border(img: np.ndarray, shave: int) -> np.ndarray:
    """Drop ``shave`` pixels from every border of the last two axes."""
    if shave < 0:
        raise DataError(f"shave must be non-negative, got {shave}")
    h, w = img.shape[-2:]
    if 2 * shave >= min(h, w):
        raise DataError(f"shave {shave} leaves nothing of a {h}×{w} image")
    if shave == 0:
        return img
    return img[..., shave:h - shave, shave:w - shave]


def _prepare(a: np.ndarray, b: np.ndarray, shave: int) -> tuple[np.ndarray, np.ndarray]:
    if a.shape != b.shape:
        raise ShapeError(f"metric inputs differ in shape: {a.shape} vs {b.shape}")
    return shave_border(a, shave).astype(np.float64), shave_border(b, shave).astype(np.float64)


def psnr(a: np.ndarray, b: np.ndarray, shave: int = 0) -> float:
    """10·log10(1 / MSE) over the shaved region, capped at 100 dB."""
    a, b = _prepare(a, b, shave)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


@cache
def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords**2) / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def _ssim_plane(a: np.ndarray, b: np.ndarray) -> float:
    window = gaussian_window()

    def blur(x: np.ndarray) -> np.ndarray:
        return convolve2d(x, window, mode="valid")

    mu_a, mu_b = blur(a), blur(b)
    mu_aa, mu_bb, mu_ab = mu_a * mu_a, mu_b * mu_b, mu_a * mu_b
    var_a = blur(a * a) - mu_aa
    var_b = blur(b * b) - mu_bb
    cov = blur(a * b) - mu_ab
    numerator = (2.0 * mu_ab + SSIM_C1) * (2.0 * cov + SSIM_C2)
    denominator = (mu_aa + mu_bb + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(numerator / denominator))


def ssim(a: np.ndarray, b: np.ndarray, shave: int = 0) -> float:
    """Mean local SSIM with an 11×11 Gaussian window (σ = 1.5); multi-channel input averages channels."""
    a, b = _prepare(a, b, shave)
    if min(a.shape[-2:]) < SSIM_WINDOW:
        raise DataError(f"image {a.shape[-2:]} is smaller than the {SSIM_WINDOW}×{SSIM_WINDOW} SSIM window")
    if a.ndim == 2:
        return _ssim_plane(a, b)
    planes_a = a.reshape(-1, *a.shape[-2:])
    planes_b = b.reshape(-1, *b.shape[-2:])
    return float(np.mean([_ssim_plane(pa, pb) for pa, pb in zip(planes_a, planes_b)]))
