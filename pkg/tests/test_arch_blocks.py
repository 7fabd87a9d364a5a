import numpy as np
import pytest

from mansr.arch import (
    LKA_7,
    LKA_21,
    LKA_35,
    ManConfig,
    build_model,
    ffn_variant_forward,
    gsau_forward,
    lka_forward,
    lkat_forward,
    mab_forward,
    mlka_forward,
    rcan_style_block_forward,
)
from mansr.arch.blocks import mlka_layout, tail_forward
from mansr.arch.layout import ConvLayout
from mansr.arch.state import ParamScope
from mansr.errors import ShapeError
from mansr.tensor import ConvParams, Tensor, conv2d, gelu, grad_check, mul, precision, tensor_sum


def lka_params(c, spec, fill=None, rng=None, prefix=""):
    shapes = {
        "dw.weight": (c, 1, spec.a, spec.a),
        "dwd.weight": (c, 1, spec.b, spec.b),
        "pw.weight": (c, c, 1, 1),
    }
    params = {}
    for name, shape in shapes.items():
        data = np.full(shape, fill) if fill is not None else rng.normal(scale=0.3, size=shape)
        params[prefix + name] = Tensor(data)
        params[prefix + name.replace("weight", "bias")] = Tensor(np.zeros(shape[0]))
    return params


def block_state(seed=0, dtype="float64", **overrides):
    config = ManConfig.create(**{"n_blocks": 1, "width": 12, "scale": 2, **overrides})
    state = build_model(config, seed, dtype=dtype)
    rng = np.random.default_rng(seed + 100)
    for tensor in state.params.values():
        tensor.data += rng.normal(0.0, 0.1, tensor.shape)
    return config, state


def zero(state, predicate):
    for name, tensor in state.items():
        if predicate(name):
            tensor.data[...] = 0.0


def support_size(out):
    rows = np.flatnonzero(np.abs(out).sum(axis=1) > 0)
    cols = np.flatnonzero(np.abs(out).sum(axis=0) > 0)
    return rows[-1] - rows[0] + 1, cols[-1] - cols[0] + 1, np.count_nonzero(out)


def test_lka_zero_weights_give_zero(rng):
    x = Tensor(rng.normal(size=(1, 4, 9, 9)))
    out = lka_forward(x, LKA_7, ParamScope(lka_params(4, LKA_7, fill=0.0)))
    np.testing.assert_array_equal(out.data, 0.0)


@pytest.mark.parametrize("spec,field", [(LKA_7, 11), (LKA_21, 23), (LKA_35, 39)])
def test_lka_receptive_field(spec, field):
    size = field + 8
    x = np.zeros((1, 1, size, size))
    x[0, 0, size // 2, size // 2] = 1.0
    out = lka_forward(Tensor(x), spec, ParamScope(lka_params(1, spec, fill=1.0))).data[0, 0]
    assert spec.receptive_field == field
    assert support_size(out) == (field, field, field * field)


def test_lka_rejects_inconsistent_params(rng):
    x = Tensor(rng.normal(size=(1, 4, 9, 9)))
    with pytest.raises(ShapeError):
        lka_forward(x, LKA_21, ParamScope(lka_params(4, LKA_7, fill=1.0)))


def test_mlka_channel_split_for_preset_width():
    layouts = mlka_layout("mlka", 48, (LKA_7, LKA_21, LKA_35))
    gates = [layout for layout in layouts if isinstance(layout, ConvLayout) and layout.name.endswith("gate")]
    assert [(g.c_in, g.k) for g in gates] == [(16, 3), (16, 5), (16, 7)]


def test_remainder_channels_go_to_the_last_group(rng):
    config, state = block_state(width=16)
    assert config.attention_widths == (5, 5, 6)
    assert state["blocks.0.mlka.group2.gate.weight"].shape == (6, 1, 7, 7)
    zero(state, lambda name: name.startswith("blocks.0.mlka.group2.gate"))
    out = mlka_forward(Tensor(rng.normal(size=(1, 16, 8, 8))), config, state.scope("blocks.0.mlka")).data
    np.testing.assert_array_equal(out[:, 10:], 0.0)
    assert np.abs(out[:, :10]).max() > 0


def test_zero_gate_zeroes_only_its_group(rng):
    config, state = block_state()
    x = Tensor(rng.normal(size=(1, 12, 8, 8)))
    zero(state, lambda name: name.startswith("blocks.0.mlka.group1.gate"))
    out = mlka_forward(x, config, state.scope("blocks.0.mlka")).data
    np.testing.assert_array_equal(out[:, 4:8], 0.0)
    assert np.abs(out[:, :4]).max() > 0 and np.abs(out[:, 8:]).max() > 0


def test_all_gates_zero_give_zero(rng):
    config, state = block_state()
    zero(state, lambda name: ".gate." in name)
    out = mlka_forward(Tensor(rng.normal(size=(1, 12, 8, 8))), config, state.scope("blocks.0.mlka"))
    np.testing.assert_array_equal(out.data, 0.0)


def test_single_group_matches_composition(rng):
    config, state = block_state(width=6, attention="lka_single", attention_groups=(1,))
    assert config.attention_specs == (LKA_21,)
    scope = state.scope("blocks.0.mlka")
    x = Tensor(rng.normal(size=(1, 6, 10, 10)))
    group = scope.child("group0")
    gate = conv2d(x, ConvParams(group["gate.weight"], group["gate.bias"], groups=6))
    y = conv2d(x, ConvParams(group["dw.weight"], group["dw.bias"], groups=6))
    y = conv2d(y, ConvParams(group["dwd.weight"], group["dwd.bias"], dilation=3, groups=6))
    y = conv2d(y, ConvParams(group["pw.weight"], group["pw.bias"]))
    np.testing.assert_allclose(mlka_forward(x, config, scope).data, mul(gate, y).data, rtol=1e-12)


def test_mlka_rejects_wrong_width(rng):
    config, state = block_state()
    with pytest.raises(ShapeError, match="width 12"):
        mlka_forward(Tensor(rng.normal(size=(1, 10, 4, 4))), config, state.scope("blocks.0.mlka"))


def test_channel_permutation_within_group_is_equivariant(rng):
    config, state = block_state()
    scope = state.scope("blocks.0.mlka")
    x = rng.normal(size=(1, 12, 8, 8))
    reference = mlka_forward(Tensor(x), config, scope).data

    perm = np.array([2, 0, 3, 1])
    group = 1
    lo = 4 * group
    permuted_state = state.copy()
    g = f"blocks.0.mlka.group{group}"
    for conv in ("dw", "dwd", "gate"):
        for part in ("weight", "bias"):
            t = permuted_state[f"{g}.{conv}.{part}"]
            t.data[...] = t.data[perm]
    pw_w = permuted_state[f"{g}.pw.weight"]
    pw_w.data[...] = pw_w.data[perm][:, perm]
    pw_b = permuted_state[f"{g}.pw.bias"]
    pw_b.data[...] = pw_b.data[perm]

    x_perm = x.copy()
    x_perm[:, lo:lo + 4] = x[:, lo + perm]
    out = mlka_forward(Tensor(x_perm), config, permuted_state.scope("blocks.0.mlka")).data
    expected = reference.copy()
    expected[:, lo:lo + 4] = reference[:, lo + perm]
    np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-12)


def gsau_scope(c, kernel_value):
    w = np.zeros((c, 1, 7, 7))
    w[:, 0, 3, 3] = kernel_value
    return ParamScope({"dw.weight": Tensor(w), "dw.bias": Tensor(np.zeros(c))})


def test_gsau_zero_y_gives_zero(rng):
    x = Tensor(rng.normal(size=(1, 3, 5, 5)))
    out = gsau_forward(x, Tensor(np.zeros((1, 3, 5, 5))), gsau_scope(3, 1.0))
    np.testing.assert_array_equal(out.data, 0.0)


def test_gsau_identity_kernel_passes_y(rng):
    y = Tensor(rng.normal(size=(1, 3, 5, 5)))
    out = gsau_forward(Tensor(np.ones((1, 3, 5, 5))), y, gsau_scope(3, 1.0))
    np.testing.assert_array_equal(out.data, y.data)


def test_gsau_matches_composition(rng):
    scope = ParamScope({"dw.weight": Tensor(rng.normal(size=(3, 1, 7, 7))), "dw.bias": Tensor(rng.normal(size=3))})
    x, y = Tensor(rng.normal(size=(1, 3, 6, 6))), Tensor(rng.normal(size=(1, 3, 6, 6)))
    expected = mul(conv2d(x, scope.conv("dw", groups=3)), y)
    np.testing.assert_array_equal(gsau_forward(x, y, scope).data, expected.data)
    with pytest.raises(ShapeError):
        gsau_forward(x, Tensor(rng.normal(size=(1, 3, 6, 5))), scope)


def test_mlp_with_zero_second_layer_is_zero(rng):
    config, state = block_state(ffn="mlp")
    zero(state, lambda name: name.startswith("blocks.0.ffn.fc2"))
    out = ffn_variant_forward(Tensor(rng.normal(size=(1, 12, 4, 4))), config, state.scope("blocks.0"))
    np.testing.assert_array_equal(out.data, 0.0)


def test_simple_gate_hand_composed():
    config = ManConfig.create(n_blocks=1, width=2, scale=2, ffn="sg", attention="lka_single")
    n = np.array([0.5, -2.0])
    fc2_w = np.array([[1.0, 2.0], [-1.0, 0.5]])
    fc2_b = np.array([0.1, -0.2])
    params = {
        "ffn.fc1.weight": Tensor(np.vstack([np.eye(2), np.eye(2)]).reshape(4, 2, 1, 1)),
        "ffn.fc1.bias": Tensor(np.zeros(4)),
        "ffn.fc2.weight": Tensor(fc2_w.reshape(2, 2, 1, 1)),
        "ffn.fc2.bias": Tensor(fc2_b),
    }
    out = ffn_variant_forward(Tensor(n.reshape(1, 2, 1, 1)), config, ParamScope(params))
    np.testing.assert_allclose(out.data.ravel(), fc2_w @ (n * n) + fc2_b)


@pytest.mark.parametrize("ffn", ["gsau", "mlp", "sg", "cff"])
def test_ffn_variants_preserve_shape(rng, ffn):
    config, state = block_state(ffn=ffn)
    x = Tensor(rng.normal(size=(2, 12, 5, 5)))
    assert ffn_variant_forward(x, config, state.scope("blocks.0")).shape == x.shape


def test_mab_with_zero_layer_scale_is_identity(rng):
    config, state = block_state()
    zero(state, lambda name: "lambda" in name)
    x = Tensor(rng.normal(size=(1, 12, 6, 6)))
    np.testing.assert_array_equal(mab_forward(x, config, state.scope("blocks.0")).data, x.data)


def test_mab_with_zero_weights_is_identity(rng):
    config, state = block_state()
    zero(state, lambda name: name.startswith("blocks.0") and "lambda" not in name and "norm" not in name)
    x = Tensor(rng.normal(size=(1, 12, 6, 6)))
    np.testing.assert_array_equal(mab_forward(x, config, state.scope("blocks.0")).data, x.data)


def test_mab_rejects_width_mismatch(rng):
    config, state = block_state()
    with pytest.raises(ShapeError):
        mab_forward(Tensor(rng.normal(size=(1, 6, 4, 4))), config, state.scope("blocks.0"))


def test_mab_near_identity_at_init(rng):
    config = ManConfig.create(n_blocks=1, width=12, scale=2)
    state = build_model(config, seed=3)
    x = Tensor(rng.normal(size=(1, 12, 8, 8)).astype(np.float32))
    out = mab_forward(x, config, state.scope("blocks.0")).data
    assert np.linalg.norm(out - x.data) < 0.1 * np.linalg.norm(x.data)


@pytest.mark.parametrize("seed", range(5))
def test_mab_gradient(seed):
    config, state = block_state(seed=seed)
    x = Tensor(np.random.default_rng(seed).normal(size=(1, 12, 5, 5)))
    projection = Tensor(np.random.default_rng(seed + 1).normal(size=(1, 12, 5, 5)))
    with precision("float64"):
        error = grad_check(
            lambda t: tensor_sum(mul(mab_forward(t, config, state.scope("blocks.0")), projection)),
            x,
            coords=20,
            rng=np.random.default_rng(seed),
        )
    assert error < 1e-4


def test_rcan_block_zero_weights_identity_and_distinct(rng):
    config, state = block_state(block_style="rcan")
    x = Tensor(rng.normal(size=(1, 12, 6, 6)))
    out = rcan_style_block_forward(x, config, state.scope("blocks.0")).data

    mab_config, mab_state = block_state()
    assert not np.allclose(out, mab_forward(x, mab_config, mab_state.scope("blocks.0")).data)

    zero(state, lambda name: "lambda" not in name)
    np.testing.assert_array_equal(rcan_style_block_forward(x, config, state.scope("blocks.0")).data, x.data)


def test_lkat_zero_weights_give_zero(rng):
    config, state = block_state()
    zero(state, lambda name: name.startswith("tail."))
    out = tail_forward(Tensor(rng.normal(size=(1, 12, 6, 6))), config, state.scope("tail"))
    np.testing.assert_array_equal(out.data, 0.0)


def test_lkat_matches_composition(rng):
    config, state = block_state()
    tail = state.scope("tail")
    x = Tensor(rng.normal(size=(1, 12, 7, 7)))
    y = gelu(conv2d(x, tail.conv("conv0")))
    y = mul(y, lka_forward(y, LKA_35, tail.child("lka")))
    expected = conv2d(y, tail.conv("conv1"))
    np.testing.assert_allclose(lkat_forward(x, tail, LKA_35).data, expected.data, rtol=1e-12)


def test_conv3x3_tail(rng):
    config, state = block_state(tail="conv3x3")
    assert "tail.conv.weight" in state.params and "tail.conv0.weight" not in state.params
    x = Tensor(rng.normal(size=(1, 12, 5, 5)))
    expected = conv2d(x, state.scope("tail").conv("conv"))
    np.testing.assert_array_equal(tail_forward(x, config, state.scope("tail")).data, expected.data)
