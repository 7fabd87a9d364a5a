from .core import (
    Tape,
    Tensor,
    active_tape,
    backward,
    get_default_dtype,
    get_num_threads,
    precision,
    set_num_threads,
)
from .gradcheck import grad_check, grad_check_params, nudge_ties
from .ops import (
    LAYER_NORM_EPS,
    ConvParams,
    add,
    channel_scale,
    concat_channels,
    conv2d,
    gelu,
    l1_loss,
    layer_norm,
    mul,
    pixel_shuffle,
    slice_channels,
    split_channels,
    tensor_sum,
)

__all__ = [
    "Tape",
    "Tensor",
    "active_tape",
    "backward",
    "get_default_dtype",
    "get_num_threads",
    "precision",
    "set_num_threads",
    "grad_check",
    "grad_check_params",
    "nudge_ties",
    "LAYER_NORM_EPS",
    "ConvParams",
    "add",
    "channel_scale",
    "concat_channels",
    "conv2d",
    "gelu",
    "l1_loss",
    "layer_norm",
    "mul",
    "pixel_shuffle",
    "slice_channels",
    "split_channels",
    "tensor_sum",
]
