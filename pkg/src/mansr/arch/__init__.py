from .blocks import (
    ffn_variant_forward,
    gsau_forward,
    lka_forward,
    lkat_forward,
    mab_forward,
    mlka_forward,
    rcan_style_block_forward,
)
from .complexity import ComplexityReport, complexity_report, count_madds, count_params
from .config import LKA_7, LKA_21, LKA_35, PRESET_SPECS, LkaSpec, ManConfig
from .network import SuperResolver, build_model, man_forward, model_layout
from .state import ModelState, ParamScope

__all__ = [
    "ffn_variant_forward",
    "gsau_forward",
    "lka_forward",
    "lkat_forward",
    "mab_forward",
    "mlka_forward",
    "rcan_style_block_forward",
    "ComplexityReport",
    "complexity_report",
    "count_madds",
    "count_params",
    "LKA_7",
    "LKA_21",
    "LKA_35",
    "PRESET_SPECS",
    "LkaSpec",
    "ManConfig",
    "SuperResolver",
    "build_model",
    "man_forward",
    "model_layout",
    "ModelState",
    "ParamScope",
]
