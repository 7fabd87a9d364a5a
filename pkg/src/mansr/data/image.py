"""8-bit PNG ingestion and output."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import DataError

PNG_SUFFIXES = (".png",)
_PROMOTABLE = {"1", "L", "LA", "P", "RGB", "RGBA"}


def list_images(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in PNG_SUFFIXES)


def read_image(path: Path) -> np.ndarray:
    """Load an 8-bit PNG as a float32 (3, h, w) array in [0, 1]; grayscale is promoted to RGB."""
    try:
        with Image.open(path) as img:
            if img.mode not in _PROMOTABLE:
                raise DataError(f"{path}: unsupported image mode {img.mode!r}; expected 8-bit RGB or grayscale")
            pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as e:
        raise DataError(f"cannot read image {path}: {e}") from e
    return np.ascontiguousarray(pixels.transpose(2, 0, 1), dtype=np.float32) / np.float32(255.0)


def to_uint8(img: np.ndarray) -> np.ndarray:
    """round(x·255) clamped to [0, 255]."""
    return np.clip(np.round(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def quantize(img: np.ndarray) -> np.ndarray:
    """Snap a float image to the 8-bit grid it would be saved on."""
    return to_uint8(img).astype(np.float32) / np.float32(255.0)


def write_image(path: Path, img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[0] != 3:
        raise DataError(f"expected a (3, h, w) image, got shape {img.shape}")
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        Image.fromarray(to_uint8(img).transpose(1, 2, 0), mode="RGB").save(path, format="PNG")
    except OSError as e:
        raise DataError(f"cannot write image {path}: {e}") from e
