import pytest

from mansr.arch import ManConfig, complexity_report, count_madds, count_params
from mansr.errors import ConfigError

HD = (720, 1280)


@pytest.mark.parametrize(
    "variant,scale,expected",
    [
        ("tiny", 2, 134_412),
        ("tiny", 4, 150_000),
        ("light", 2, 823_392),
        ("light", 4, 842_868),
        ("classical", 4, 8_712_588),
    ],
)
def test_parameter_counts(variant, scale, expected):
    assert count_params(ManConfig.preset(variant, scale=scale)) == expected


@pytest.mark.parametrize(
    "variant,scale,expected",
    [("tiny", 4, 8.39e9), ("tiny", 2, 29.96e9), ("light", 4, 47.1e9)],
)
def test_madds_at_720p(variant, scale, expected):
    madds = count_madds(ManConfig.preset(variant, scale=scale), *HD)
    assert madds == pytest.approx(expected, rel=0.01)


def test_madds_scale_with_lr_pixels():
    config = ManConfig.preset("tiny", scale=4)
    assert count_madds(config, 400, 400) == 4 * count_madds(config, 200, 200)
    # rows that do not fill a whole LR pixel are dropped
    assert count_madds(config, 403, 401) == count_madds(config, 400, 400)


def test_rejects_empty_output():
    with pytest.raises(ConfigError):
        count_madds(ManConfig.preset("tiny"), 0, 100)


@pytest.mark.parametrize(
    "overrides,expected,rel",
    [
        ({"ffn": "cff"}, 1_144_000, 0.01),
        ({"ffn": "mlp"}, 857_000, 0.01),
        ({"ffn": "sg"}, 771_000, 0.01),
        ({"block_style": "rcan"}, 934_308, 0.0),
    ],
)
def test_ablation_counts(overrides, expected, rel):
    assert count_params(ManConfig.preset("light", scale=4, **overrides)) == pytest.approx(expected, rel=rel)


def test_ablation_ordering():
    light = {ffn: count_params(ManConfig.preset("light", scale=4, ffn=ffn)) for ffn in ("gsau", "mlp", "sg", "cff")}
    assert light["sg"] < light["gsau"] < light["mlp"] < light["cff"]


def test_attention_and_tail_ablation_counts():
    base = ManConfig.preset("light", scale=4)
    # one 60-channel 5-7-1 group has a wider pointwise conv than three 20-channel groups
    assert count_params(base.replace(attention="lka_single")) - count_params(base) == 24 * 1_920
    # a plain 3×3 tail conv carries more weights than the decomposed attention tail
    assert count_params(base.replace(tail="conv3x3")) - count_params(base) == 13_560


def test_breakdown_sums_to_totals():
    config = ManConfig.preset("light", scale=4)
    report = complexity_report(config, *HD)
    assert list(report.frame.index) == ["head", "blocks", "tail", "reconstruction"]
    assert report.params == count_params(config)
    assert report.madds == count_madds(config, *HD)
    assert report.bias_adds > 0 and report.elementwise > 0
    assert report.frame.loc["blocks", "params"] > report.frame.loc["head", "params"]
