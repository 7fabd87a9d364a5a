"""Benchmark protocol: super-resolve every image, score it, aggregate into a report."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field
from rich.table import Table

from ..data import DatasetIndex, ImagePair, bicubic_resize, dihedral, invert_dihedral, quantize
from ..data.pipeline import DIHEDRAL_ORDER
from ..errors import DataError
from ..telemetry import get_tracer
from .quality import psnr, rgb_to_y, ssim

log = structlog.get_logger()


class Upscaler(Protocol):
    """Anything mapping a (3, h, w) image in [0, 1] to (3, s·h, s·w)."""

    scale: int

    def __call__(self, lr: np.ndarray) -> np.ndarray: ...


class BicubicUpscaler:
    """Baseline: bicubic upscaling with the degradation kernel."""

    name = "bicubic"

    def __init__(self, scale: int):
        self.scale = scale

    def __call__(self, lr: np.ndarray) -> np.ndarray:
        _, h, w = lr.shape
        return bicubic_resize(lr, self.scale * h, self.scale * w, antialias=True)


class EvalProtocol(BaseModel):
    """How SR output is scored. ``shave=None`` means shave ``scale`` pixels."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    y_channel: bool = True
    shave: int | None = Field(default=None, ge=0)
    self_ensemble: bool = False
    quantize: bool = True
    workers: int = Field(default=1, gt=0)

    def shave_for(self, scale: int) -> int:
        return scale if self.shave is None else self.shave


def self_ensemble(model: Upscaler, lr: np.ndarray) -> np.ndarray:
    """Mean of the eight dihedral round trips: transform → upscale → inverse transform."""
    total = None
    for k in range(DIHEDRAL_ORDER):
        restored = invert_dihedral(model(dihedral(lr, k)), k).astype(np.float64)
        total = restored if total is None else total + restored
    return (total / DIHEDRAL_ORDER).astype(lr.dtype)


@dataclass(frozen=True)
class ImageScore:
    id: str
    psnr: float
    ssim: float


@dataclass
class MetricReport:
    scores: list[ImageScore]
    scale: int
    shave: int
    y_channel: bool
    self_ensemble: bool
    lr_source: str = ""
    model_name: str = ""

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([s.psnr for s in self.scores]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([s.ssim for s in self.scores]))

    @property
    def protocol_line(self) -> str:
        return (
            f"y_channel={str(self.y_channel).lower()} shave={self.shave} scale={self.scale} "
            f"self_ensemble={str(self.self_ensemble).lower()} lr_source={self.lr_source or 'unknown'}"
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{"id": s.id, "psnr": s.psnr, "ssim": s.ssim} for s in self.scores], columns=["id", "psnr", "ssim"])

    def write_csv(self, path: Path) -> None:
        """``id,psnr,ssim`` rows between a protocol header comment and a summary comment."""
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            f.write(f"# protocol: {self.protocol_line}\n")
            self.to_frame().to_csv(f, index=False, float_format="%.6f")
            f.write(f"# mean_psnr={self.mean_psnr:.6f} mean_ssim={self.mean_ssim:.6f} images={len(self.scores)}\n")

    @staticmethod
    def read_csv(path: Path) -> pd.DataFrame:
        return pd.read_csv(path, comment="#")

    def to_table(self) -> Table:
        title = f"{self.model_name or 'model'} ×{self.scale}"
        table = Table(title=title, caption=self.protocol_line)
        table.add_column("Image", style="cyan")
        table.add_column("PSNR (dB)", justify="right")
        table.add_column("SSIM", justify="right")
        for s in self.scores:
            table.add_row(s.id, f"{s.psnr:.2f}", f"{s.ssim:.4f}")
        table.add_section()
        table.add_row("mean", f"{self.mean_psnr:.2f}", f"{self.mean_ssim:.4f}", style="bold")
        return table


def score_pair(sr: np.ndarray, hr: np.ndarray, shave: int, y_channel: bool) -> tuple[float, float]:
    if y_channel:
        sr, hr = rgb_to_y(sr)[0], rgb_to_y(hr)[0]
    return psnr(sr, hr, shave), ssim(sr, hr, shave)


def evaluate(model: Upscaler, dataset: DatasetIndex, protocol: EvalProtocol | None = None) -> MetricReport:
    """Score ``model`` on every pair; results keep dataset order regardless of worker count."""
    protocol = protocol or EvalProtocol()
    if len(dataset) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    if model.scale != dataset.scale:
        raise DataError(f"model scale ×{model.scale} does not match dataset scale ×{dataset.scale}")
    shave = protocol.shave_for(dataset.scale)
    tracer = get_tracer()

    def run(pair: ImagePair) -> ImageScore:
        with tracer.start_as_current_span("evaluate.image") as span:
            span.set_attribute("image.id", pair.id)
            sr = self_ensemble(model, pair.lr) if protocol.self_ensemble else model(pair.lr)
            if sr.shape != pair.hr.shape:
                raise DataError(f"{pair.id}: output {sr.shape} does not match hr {pair.hr.shape}")
            if protocol.quantize:
                sr = quantize(sr)
            p, s = score_pair(sr, pair.hr, shave, protocol.y_channel)
            log.debug("image scored", id=pair.id, psnr=round(p, 4), ssim=round(s, 5))
            return ImageScore(pair.id, p, s)

    with tracer.start_as_current_span("evaluate") as span:
        span.set_attribute("evaluate.images", len(dataset))
        if protocol.workers == 1:
            scores = [run(pair) for pair in dataset]
        else:
            with ThreadPoolExecutor(max_workers=protocol.workers, thread_name_prefix="mansr-eval") as pool:
                scores = list(pool.map(run, dataset))

    report = MetricReport(
        scores=scores,
        scale=dataset.scale,
        shave=shave,
        y_channel=protocol.y_channel,
        self_ensemble=protocol.self_ensemble,
        lr_source=dataset.lr_source,
        model_name=getattr(model, "name", type(model).__name__),
    )
    log.info("evaluation done", images=len(scores), psnr=round(report.mean_psnr, 4), ssim=round(report.mean_ssim, 5))
    return report
