from .evaluate import (
    BicubicUpscaler,
    EvalProtocol,
    ImageScore,
    MetricReport,
    Upscaler,
    evaluate,
    score_pair,
    self_ensemble,
)
from .quality import PSNR_CAP, gaussian_window, psnr, rgb_to_y, shave_border, ssim

__all__ = [
    "BicubicUpscaler",
    "EvalProtocol",
    "ImageScore",
    "MetricReport",
    "Upscaler",
    "evaluate",
    "score_pair",
    "self_ensemble",
    "PSNR_CAP",
    "gaussian_window",
    "psnr",
    "rgb_to_y",
    "shave_border",
    "ssim",
]
