#!/usr/bin/env python3
"""Desk-scale learning check: MAN-tiny ×4 trained briefly must beat bicubic on held-out images.

    uv run scripts/learning_signal.py --hr-dir data/DIV2K/HR --out runs/learning_signal
"""

import argparse
import sys
from pathlib import Path

from rich.console import Console
from rich.table import Table

from mansr.arch import ManConfig, SuperResolver, build_model
from mansr.data import load_dataset
from mansr.logging import setup_logging
from mansr.metrics import BicubicUpscaler, EvalProtocol, evaluate
from mansr.optim import TrainConfig, train

REQUIRED_GAIN_DB = 0.3


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--hr-dir", type=Path, required=True)
    parser.add_argument("--out", type=Path, default=Path("runs/learning_signal"))
    parser.add_argument("--iters", type=int, default=3000)
    parser.add_argument("--train-images", type=int, default=20)
    parser.add_argument("--holdout-images", type=int, default=5)
    parser.add_argument("--batch", type=int, default=16)
    parser.add_argument("--patch", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    setup_logging()
    console = Console()
    scale = 4
    everything = load_dataset(args.hr_dir, scale, "hr_only")
    ids = [pair.id for pair in everything]
    if len(ids) < args.train_images + args.holdout_images:
        console.print(f"need {args.train_images + args.holdout_images} images, found {len(ids)}")
        return 2
    train_set = everything.subset(ids[: args.train_images])
    holdout = everything.subset(ids[args.train_images : args.train_images + args.holdout_images])

    cfg = TrainConfig.create(
        lr0=5e-4, total_iters=args.iters, batch=args.batch, patch=args.patch, seed=args.seed, log_every=250
    )
    model, _ = train(build_model(ManConfig.preset("tiny", scale), args.seed), train_set, cfg, out_dir=args.out)

    protocol = EvalProtocol(shave=scale)
    ours = evaluate(SuperResolver(model), holdout, protocol)
    baseline = evaluate(BicubicUpscaler(scale), holdout, protocol)
    gain = ours.mean_psnr - baseline.mean_psnr

    table = Table(title=f"held-out Y-PSNR ×{scale} ({ours.protocol_line})")
    table.add_column("model")
    table.add_column("PSNR (dB)", justify="right")
    table.add_column("SSIM", justify="right")
    table.add_row("bicubic", f"{baseline.mean_psnr:.3f}", f"{baseline.mean_ssim:.4f}")
    table.add_row(f"man-tiny, {args.iters} iters", f"{ours.mean_psnr:.3f}", f"{ours.mean_ssim:.4f}")
    console.print(table)
    console.print(f"gain: {gain:+.3f} dB (required ≥ {REQUIRED_GAIN_DB} dB)")
    ours.write_csv(args.out / "holdout_man.csv")
    baseline.write_csv(args.out / "holdout_bicubic.csv")
    return 0 if gain >= REQUIRED_GAIN_DB else 1


if __name__ == "__main__":
    sys.exit(main())
