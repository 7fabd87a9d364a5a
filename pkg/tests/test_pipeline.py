import numpy as np
import pytest

from conftest import smooth_image
from mansr.data import (
    ImagePair,
    augment,
    bicubic_resize,
    crop_to_scale,
    degrade,
    dihedral,
    dihedral_inverse,
    invert_dihedral,
    sample_patch,
)
from mansr.errors import DataError, ShapeError


def nearest_pair(lr, scale, id="pair"):
    hr = np.kron(lr, np.ones((1, scale, scale), dtype=lr.dtype))
    return ImagePair(hr=hr, lr=lr, scale=scale, id=id)


@pytest.mark.parametrize("size,scale,expected", [(49, 4, 48), (50, 4, 48), (48, 3, 48), (31, 2, 30)])
def test_crop_to_scale(size, scale, expected):
    hr = np.zeros((3, size, size + 1))
    out = crop_to_scale(hr, scale)
    assert out.shape[1] == expected and out.shape[2] % scale == 0


def test_crop_is_centered():
    hr = np.arange(50, dtype=np.float64)[None, :, None] * np.ones((3, 1, 48))
    out = crop_to_scale(hr, 4)
    assert out[0, 0, 0] == 1.0 and out[0, -1, 0] == 48.0


def test_degrade_shapes_and_values():
    pair = degrade(smooth_image(49, 49), 4, id="x")
    assert pair.hr.shape == (3, 48, 48) and pair.lr.shape == (3, 12, 12)
    assert pair.lr.dtype == np.float32 and pair.id == "x"
    np.testing.assert_array_equal(pair.lr, bicubic_resize(pair.hr, 12, 12))


def test_degrade_keeps_constants():
    pair = degrade(np.full((3, 32, 32), 0.6, dtype=np.float32), 2)
    np.testing.assert_allclose(pair.lr, 0.6, atol=1e-6)


def test_degrade_of_smooth_image_tracks_block_means():
    hr = smooth_image(64, 64, seed=3)
    pair = degrade(hr, 2)
    block_means = hr.reshape(3, 32, 2, 32, 2).mean(axis=(2, 4))
    assert np.abs(pair.lr - block_means)[:, 2:-2, 2:-2].max() < 1e-2


@pytest.mark.parametrize("first,second", [(2, 2), (2, 3)])
def test_degrade_composes_on_smooth_images(first, second):
    hr = smooth_image(96, 96, seed=5)
    twice = degrade(degrade(hr, first).lr, second).lr
    once = degrade(hr, first * second).lr
    assert twice.shape == once.shape
    assert np.abs(twice - once)[:, 2:-2, 2:-2].max() < 1e-3


def test_degrade_rejects_tiny_images():
    with pytest.raises(DataError):
        degrade(np.zeros((3, 3, 8), dtype=np.float32), 4)


def test_misaligned_pair_rejected():
    with pytest.raises(DataError):
        ImagePair(hr=np.zeros((3, 8, 8)), lr=np.zeros((3, 3, 4)), scale=2, id="bad")


def test_sample_patch_alignment(rng):
    lr = rng.uniform(size=(3, 10, 12)).astype(np.float32)
    pair = nearest_pair(lr, 3)
    for _ in range(20):
        lr_patch, hr_patch = sample_patch(pair, 4, rng)
        assert lr_patch.shape == (3, 4, 4) and hr_patch.shape == (3, 12, 12)
        np.testing.assert_array_equal(hr_patch, np.kron(lr_patch, np.ones((1, 3, 3), dtype=np.float32)))


def test_sample_patch_is_reproducible(rng):
    pair = nearest_pair(rng.uniform(size=(3, 16, 16)), 2)
    a = sample_patch(pair, 5, np.random.default_rng(7))
    b = sample_patch(pair, 5, np.random.default_rng(7))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_sample_patch_too_large(rng):
    pair = nearest_pair(rng.uniform(size=(3, 4, 6)), 2)
    with pytest.raises(DataError, match="larger"):
        sample_patch(pair, 5, rng)


def test_dihedral_inverses(rng):
    x = rng.uniform(size=(3, 5, 7))
    for k in range(8):
        np.testing.assert_array_equal(invert_dihedral(dihedral(x, k), k), x)
        assert dihedral_inverse(dihedral_inverse(k)) == k


def test_dihedral_elements_distinct_and_closed(rng):
    x = rng.uniform(size=(1, 4, 4))
    images = [dihedral(x, k) for k in range(8)]
    keys = {img.tobytes() for img in images}
    assert len(keys) == 8
    for a in range(8):
        for b in range(8):
            assert dihedral(dihedral(x, a), b).tobytes() in keys


def test_dihedral_index_range(rng):
    with pytest.raises(ValueError):
        dihedral(rng.uniform(size=(1, 2, 2)), 8)


def test_augment_applies_same_transform(rng):
    pair = nearest_pair(rng.uniform(size=(3, 6, 6)).astype(np.float32), 2)
    for _ in range(16):
        lr, hr = augment(pair.lr, pair.hr, rng)
        np.testing.assert_array_equal(hr, np.kron(lr, np.ones((1, 2, 2), dtype=np.float32)))


def test_augment_rejects_non_square(rng):
    pair = nearest_pair(rng.uniform(size=(3, 4, 6)), 2)
    with pytest.raises(ShapeError):
        augment(pair.lr, pair.hr, rng)
