"""Training loop: sample → augment → forward → ℓ1 → backward → Adam, on a cosine schedule."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..arch import ModelState, man_forward
from ..data import BatchStream, DatasetIndex, batch_rng, rng_state_bytes
from ..errors import ConfigError, NumericError
from ..telemetry import get_tracer
from ..tensor import Tape, l1_loss
from .adam import AdamState, adam_step, clip_grad_norm
from .schedule import LR_MIN, cosine_lr
from .weights import load_checkpoint, save_checkpoint, save_weights

log = structlog.get_logger()

CHECKPOINT_NAME = "checkpoint.manc"
WEIGHTS_NAME = "model.manw"
LOSS_LOG_NAME = "loss.csv"

TRAIN_PRESETS: dict[str, dict[str, Any]] = {
    "scratch": {"stage": "scratch", "lr0": 5e-4, "total_iters": 160_000, "batch": 32, "patch": 48},
    "finetune": {"stage": "finetune", "lr0": 1e-4, "total_iters": 80_000, "batch": 16, "patch": 64},
    "ablation": {"stage": "scratch", "lr0": 5e-4, "total_iters": 20_000, "batch": 32, "patch": 48},
}


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lr0: float = Field(default=5e-4, ge=0)
    lr_min: float = Field(default=LR_MIN, ge=0)
    total_iters: int = Field(default=160_000, ge=0)
    batch: int = Field(default=32, gt=0)
    patch: int = Field(default=48, gt=0)
    seed: int = Field(default=0, ge=0)
    stage: Literal["scratch", "finetune"] = "scratch"
    eval_every: int = Field(default=0, ge=0)
    checkpoint_every: int = Field(default=0, ge=0)
    log_every: int = Field(default=100, gt=0)
    grad_clip: float | None = Field(default=None, gt=0)
    augment: bool = True
    workers: int = Field(default=2, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _stage_defaults(cls, data: Any) -> Any:
        """A stage fills the fields the caller left unset from its preset."""
        if isinstance(data, dict) and data.get("stage") == "finetune":
            return {**TRAIN_PRESETS["finetune"], **data}
        return data

    @classmethod
    def create(cls, **fields: Any) -> TrainConfig:
        try:
            return cls.model_validate(fields)
        except ValidationError as e:
            raise ConfigError(f"invalid train config: {e}") from e

    @classmethod
    def preset(cls, name: str, **overrides: Any) -> TrainConfig:
        if name not in TRAIN_PRESETS:
            raise ConfigError(f"unknown training preset {name!r}; expected one of {sorted(TRAIN_PRESETS)}")
        return cls.create(**{**TRAIN_PRESETS[name], **overrides})


@dataclass
class LossLog:
    iterations: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    lrs: list[float] = field(default_factory=list)

    def append(self, iteration: int, loss: float, lr: float) -> None:
        self.iterations.append(iteration)
        self.losses.append(loss)
        self.lrs.append(lr)

    def __len__(self) -> int:
        return len(self.losses)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"iteration": self.iterations, "loss": self.losses, "lr": self.lrs})

    def write_csv(self, path: Path, append: bool = False, first: int = 0) -> None:
        """Write rows ``first:``; appending to an existing file skips the header."""
        frame = self.to_frame().iloc[first:]
        exists = path.exists()
        frame.to_csv(path, mode="a" if append else "w", header=not (append and exists), index=False)

    def smoothed(self, window: int = 50) -> pd.Series:
        """Mean loss over consecutive non-overlapping windows; a trailing partial window is dropped."""
        frame = self.to_frame()
        full = len(frame) - len(frame) % window
        return frame["loss"].iloc[:full].groupby(frame.index[:full] // window).mean()


def truncate_loss_log(path: Path, start: int) -> None:
    """Keep only rows before ``start`` so a resumed run neither repeats nor skips iterations."""
    if not path.exists():
        return
    if start == 0:
        path.unlink()
        return
    frame = pd.read_csv(path)
    frame[frame["iteration"] < start].to_csv(path, index=False)


EvalCallback = Callable[[ModelState, int], None]


def train(
    model: ModelState,
    data: DatasetIndex,
    cfg: TrainConfig,
    out_dir: Path | None = None,
    resume: Path | None = None,
    stop_at: int | None = None,
    on_eval: EvalCallback | None = None,
) -> tuple[ModelState, LossLog]:
    """Run ``cfg.total_iters`` Adam steps (or up to ``stop_at``), optionally resuming from a checkpoint."""
    tracer = get_tracer()
    adam = AdamState.for_params(model.params)
    start = 0
    if resume is not None:
        checkpoint = load_checkpoint(resume, model.config)
        model, adam, start = checkpoint.state, checkpoint.adam, checkpoint.step
        if checkpoint.rng_state != rng_state_bytes(batch_rng(cfg.seed, start)):
            log.warning("checkpoint rng state does not match this config's seed", path=str(resume), step=start)
        log.info("resumed", path=str(resume), step=start)
    end = cfg.total_iters if stop_at is None else min(stop_at, cfg.total_iters)

    losses = LossLog()
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    if start >= end:
        return model, losses

    stream = BatchStream(data, cfg.batch, cfg.patch, cfg.seed, augment_patches=cfg.augment, workers=cfg.workers)
    loss_path = out_dir / LOSS_LOG_NAME if out_dir is not None else None
    if loss_path is not None:
        truncate_loss_log(loss_path, start)
    flushed = 0

    def flush_losses() -> None:
        nonlocal flushed
        if loss_path is not None and flushed < len(losses):
            losses.write_csv(loss_path, append=True, first=flushed)
            flushed = len(losses)

    tape = Tape()
    with tracer.start_as_current_span("train") as span:
        span.set_attribute("train.start", start)
        span.set_attribute("train.end", end)
        span.set_attribute("train.params", model.num_params)
        try:
            for batch in stream.iterate(start, end):
                t = batch.iteration
                lr = cosine_lr(t, cfg.total_iters, cfg.lr0, cfg.lr_min)
                model.zero_grad()
                tape.reset()
                with tape:
                    loss = l1_loss(man_forward(batch.lr, model), batch.hr)
                value = loss.item()
                if not math.isfinite(value):
                    raise NumericError(f"non-finite loss {value} at iteration {t}")
                tape.backward(loss)

                grads = {name: p.grad for name, p in model.items()}
                if cfg.grad_clip is not None:
                    clip_grad_norm(grads, cfg.grad_clip)
                adam_step(model.params, grads, adam, lr)
                losses.append(t, value, lr)

                done = t + 1
                if done % cfg.log_every == 0 or done == end:
                    log.info("training step", iteration=done, loss=round(value, 6), lr=lr)
                if out_dir is not None and cfg.checkpoint_every and done % cfg.checkpoint_every == 0:
                    with tracer.start_as_current_span("train.checkpoint"):
                        save_checkpoint(
                            out_dir / CHECKPOINT_NAME, model, adam, rng_state_bytes(batch_rng(cfg.seed, done))
                        )
                    flush_losses()
                if on_eval is not None and cfg.eval_every and done % cfg.eval_every == 0:
                    on_eval(model, done)
        finally:
            # rows past the last checkpoint are dropped again on resume
            flush_losses()

    if out_dir is not None:
        save_checkpoint(out_dir / CHECKPOINT_NAME, model, adam, rng_state_bytes(batch_rng(cfg.seed, end)))
        save_weights(model, out_dir / WEIGHTS_NAME)
    return model, losses
