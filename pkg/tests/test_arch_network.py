import numpy as np
import pytest

from mansr.arch import ManConfig, SuperResolver, build_model, count_params, man_forward
from mansr.arch.blocks import tail_forward
from mansr.arch.network import param_shapes
from mansr.errors import ShapeError
from mansr.tensor import Tensor, conv2d, grad_check_params, mul, pixel_shuffle, precision, tensor_sum


@pytest.fixture
def small_config():
    return ManConfig.create(n_blocks=1, width=12, scale=2)


def test_tiny_x4_output_shape(rng):
    state = build_model(ManConfig.preset("tiny", scale=4), seed=0)
    lr = rng.uniform(size=(3, 48, 48)).astype(np.float32)
    sr = man_forward(lr, state)
    assert sr.shape == (3, 192, 192)


@pytest.mark.parametrize("scale", [2, 3, 4])
def test_batched_output_shape(rng, scale):
    state = build_model(ManConfig.create(n_blocks=1, width=12, scale=scale))
    sr = man_forward(Tensor(rng.uniform(size=(2, 3, 7, 5)).astype(np.float32)), state)
    assert sr.shape == (2, 3, 7 * scale, 5 * scale)


def test_rejects_bad_input(small_config, rng):
    state = build_model(small_config)
    with pytest.raises(ShapeError):
        man_forward(rng.uniform(size=(1, 7, 7)).astype(np.float32), state)
    with pytest.raises(ShapeError):
        man_forward(rng.uniform(size=(7, 7)).astype(np.float32), state)


def test_zero_layer_scale_reduces_to_head_tail_and_reconstruction(small_config, rng):
    state = build_model(small_config, seed=4, dtype="float64")
    for name, tensor in state.items():
        if "lambda" in name:
            tensor.data[...] = 0.0
    x = Tensor(rng.uniform(size=(1, 3, 6, 6)))
    params = state.scope()
    shallow = conv2d(x, params.conv("sf"))
    h = tail_forward(shallow, small_config, params.child("tail"))
    expected = pixel_shuffle(conv2d(Tensor(h.data + shallow.data), params.conv("recon")), 2)
    np.testing.assert_allclose(man_forward(x, state).data, expected.data, rtol=1e-10, atol=1e-12)


def test_forward_is_deterministic(small_config, rng):
    state = build_model(small_config, seed=1)
    lr = rng.uniform(size=(3, 8, 8)).astype(np.float32)
    np.testing.assert_array_equal(man_forward(lr, state).data, man_forward(lr, state).data)


def test_same_seed_same_parameters(small_config):
    a, b = build_model(small_config, seed=9), build_model(small_config, seed=9)
    c = build_model(small_config, seed=10)
    assert all(np.array_equal(a[name].data, b[name].data) for name in a)
    assert any(not np.array_equal(a[name].data, c[name].data) for name in a if name.endswith("weight"))


@pytest.mark.parametrize("variant", ["tiny", "light"])
def test_inventory_matches_counter(variant):
    config = ManConfig.preset(variant, scale=4)
    state = build_model(config)
    assert state.num_params == count_params(config)
    assert state.shapes() == param_shapes(config)


def test_initialization(small_config):
    state = build_model(small_config, seed=2)
    weights = np.concatenate([t.data.ravel() for name, t in state.items() if name.endswith("weight") and "norm" not in name])
    assert np.abs(weights).max() <= 0.04 + 1e-7
    assert 0.01 < weights.std() < 0.02
    assert all(np.all(t.data == 0) for name, t in state.items() if name.endswith(".bias") and "norm" not in name)
    assert all(np.all(t.data == 1e-2) for name, t in state.items() if "lambda" in name)
    assert np.all(state["blocks.0.norm1.weight"].data == 1.0)


def test_super_resolver_wrapper(small_config, rng):
    model = SuperResolver(build_model(small_config))
    out = model(rng.uniform(size=(3, 5, 4)))
    assert out.shape == (3, 10, 8) and out.dtype == np.float32
    assert model.scale == 2 and model.name == "man-custom-x2"


@pytest.mark.parametrize("seed", range(5))
def test_end_to_end_gradient(seed):
    config = ManConfig.create(n_blocks=1, width=12, scale=2)
    state = build_model(config, seed=seed, dtype="float64")
    rng = np.random.default_rng(seed)
    for tensor in state.params.values():
        tensor.data += rng.normal(0.0, 0.1, tensor.shape)
    lr = Tensor(rng.uniform(size=(1, 3, 6, 6)))
    projection = Tensor(rng.normal(size=(1, 3, 12, 12)))
    with precision("float64"):
        errors = grad_check_params(
            lambda: tensor_sum(mul(man_forward(lr, state), projection)),
            state.params,
            coords_per_tensor=2,
            rng=rng,
        )
    assert max(errors.values()) < 1e-4
