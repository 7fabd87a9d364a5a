import numpy as np
import pytest
from PIL import Image

from conftest import save_png, smooth_image
from mansr.data import BatchStream, batch_rng, load_dataset, quantize, read_image, rng_state_bytes, write_image
from mansr.errors import DataError


def test_empty_directory(tmp_path):
    (tmp_path / "HR").mkdir()
    with pytest.raises(DataError, match="no images"):
        load_dataset(tmp_path, 4)


def test_missing_directory(tmp_path):
    with pytest.raises(DataError, match="does not exist"):
        load_dataset(tmp_path / "nope", 2)


def test_hr_only_degrades_every_image(make_hr_dir):
    root = make_hr_dir(3, 49, 50)
    data = load_dataset(root, 4)
    assert len(data) == 3
    assert [p.id for p in data] == ["img00", "img01", "img02"]
    assert all(p.hr.shape == (3, 48, 48) and p.lr.shape == (3, 12, 12) for p in data)
    assert data.lr_source == "bicubic degradation"


def test_flat_directory_without_hr_subdir(tmp_path):
    for i in range(2):
        save_png(tmp_path / f"a{i}.png", smooth_image(16, 16, seed=i))
    assert len(load_dataset(tmp_path, 2)) == 2


def test_paired_dirs(make_hr_dir):
    root = make_hr_dir(2, 32, 32)
    for i in range(2):
        save_png(root / "LRx2" / f"img{i:02d}.png", smooth_image(16, 16, seed=10 + i))
    data = load_dataset(root, 2, mode="paired_dirs")
    assert data.lr_source == "provided LR files"
    np.testing.assert_allclose(data[1].lr, quantize(smooth_image(16, 16, seed=11)), atol=1e-6)


def test_paired_dimension_mismatch_names_the_file(make_hr_dir):
    root = make_hr_dir(2, 32, 32)
    save_png(root / "LRx2" / "img00.png", smooth_image(16, 16))
    save_png(root / "LRx2" / "img01.png", smooth_image(15, 16))
    with pytest.raises(DataError, match="img01.png"):
        load_dataset(root, 2, mode="paired_dirs")


def test_paired_missing_lr(make_hr_dir):
    root = make_hr_dir(2, 32, 32)
    save_png(root / "LRx2" / "img00.png", smooth_image(16, 16))
    with pytest.raises(DataError, match="img01.png"):
        load_dataset(root, 2, mode="paired_dirs")


def test_grayscale_promoted_to_rgb(tmp_path):
    path = save_png(tmp_path / "gray.png", smooth_image(8, 8)[0])
    img = read_image(path)
    assert img.shape == (3, 8, 8) and img.dtype == np.float32
    np.testing.assert_array_equal(img[0], img[2])


def test_unreadable_image(tmp_path):
    path = tmp_path / "broken.png"
    path.write_bytes(b"not a png")
    with pytest.raises(DataError, match="broken.png"):
        read_image(path)


def test_sixteen_bit_rejected(tmp_path):
    path = tmp_path / "deep.png"
    Image.fromarray(np.full((4, 4), 40000, dtype=np.uint16)).save(path)
    with pytest.raises(DataError, match="mode"):
        read_image(path)


def test_write_then_read_is_quantized(tmp_path, rng):
    img = rng.uniform(size=(3, 5, 6)).astype(np.float32)
    write_image(tmp_path / "out" / "x.png", img)
    np.testing.assert_allclose(read_image(tmp_path / "out" / "x.png"), quantize(img), atol=1e-7)


def test_rng_state_bytes():
    state = rng_state_bytes(batch_rng(1, 5))
    assert len(state) == 32
    assert state == rng_state_bytes(batch_rng(1, 5))
    assert state != rng_state_bytes(batch_rng(1, 6))


@pytest.fixture
def dataset(make_hr_dir):
    return load_dataset(make_hr_dir(3, 40, 40), 2)


def test_batch_shapes(dataset):
    batch = BatchStream(dataset, batch=4, patch=8, seed=0, workers=1).batch_at(0)
    assert batch.lr.shape == (4, 3, 8, 8) and batch.hr.shape == (4, 3, 16, 16)
    assert batch.size == 4 and batch.iteration == 0 and len(batch.rng_state) == 32


def test_batches_independent_of_worker_count(dataset):
    serial = list(BatchStream(dataset, 3, 6, seed=11, workers=1).iterate(0, 6))
    threaded = list(BatchStream(dataset, 3, 6, seed=11, workers=3).iterate(0, 6))
    assert [b.iteration for b in threaded] == list(range(6))
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a.lr.data, b.lr.data)
        np.testing.assert_array_equal(a.hr.data, b.hr.data)


def test_batch_depends_only_on_seed_and_iteration(dataset):
    stream = BatchStream(dataset, 2, 6, seed=5, workers=1)
    late = list(stream.iterate(3, 5))
    np.testing.assert_array_equal(late[0].lr.data, stream.batch_at(3).lr.data)
    other = BatchStream(dataset, 2, 6, seed=6, workers=1).batch_at(3)
    assert not np.array_equal(other.lr.data, late[0].lr.data)


def test_patch_larger_than_every_image(dataset):
    with pytest.raises(DataError, match="smaller than"):
        BatchStream(dataset, 2, 32, seed=0)
