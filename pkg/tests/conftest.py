from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from mansr.tensor import precision, set_num_threads


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def f64():
    with precision("float64"):
        yield


@pytest.fixture
def single_thread():
    from mansr.tensor import get_num_threads

    previous = get_num_threads()
    set_num_threads(1)
    yield
    set_num_threads(previous)


def smooth_image(h: int, w: int, seed: int = 0) -> np.ndarray:
    """Low-frequency RGB test pattern in [0.1, 0.9], as (3, h, w) float32."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    channels = []
    for _ in range(3):
        fy, fx, phase = rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0, np.pi)
        channels.append(0.5 + 0.4 * np.sin(2 * np.pi * (fy * yy + fx * xx) + phase))
    return np.stack(channels).astype(np.float32)


def save_png(path: Path, img: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.clip(np.round(img * 255), 0, 255).astype(np.uint8)
    if pixels.ndim == 3:
        Image.fromarray(pixels.transpose(1, 2, 0), mode="RGB").save(path)
    else:
        Image.fromarray(pixels, mode="L").save(path)
    return path


@pytest.fixture
def make_hr_dir(tmp_path):
    """Write n smooth HR PNGs under <root>/HR and return the root."""

    def make(n: int = 3, h: int = 48, w: int = 48, name: str = "set") -> Path:
        root = tmp_path / name
        for i in range(n):
            save_png(root / "HR" / f"img{i:02d}.png", smooth_image(h, w, seed=i))
        return root

    return make
