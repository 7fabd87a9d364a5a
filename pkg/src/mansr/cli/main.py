"""Command-line entry point: train, eval, sr, count, gradcheck, degrade.

Exit codes: 0 success, 1 configuration, 2 data or I/O, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
import structlog
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from ..arch import ManConfig, SuperResolver, build_model, complexity_report, count_madds, count_params, man_forward
from ..config import runtime
from ..data import degrade, list_images, load_dataset, read_image, write_image
from ..errors import ConfigError, DataError, ManError, NumericError
from ..logging import setup_logging
from ..metrics import BicubicUpscaler, EvalProtocol, evaluate, self_ensemble
from ..optim import load_config, load_weights, train
from ..telemetry import get_tracer, setup_telemetry
from ..tensor import Tensor, grad_check_params, mul, precision, set_num_threads, tensor_sum
from ..tensor.gradcheck import TOLERANCE
from .runconfig import RunConfig, load_run_config, model_from_table

log = structlog.get_logger()
console = Console()

GRADCHECK_MAX_WIDTH = 16


def _out_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"--out-size must look like WIDTHxHEIGHT, got {text!r}") from None
    return w, h


def _human(n: int, unit: str = "") -> str:
    for threshold, suffix in ((1e9, "G"), (1e6, "M"), (1e3, "K")):
        if n >= threshold:
            return f"{n / threshold:.2f}{suffix}{unit}"
    return f"{n}{unit}"


def _model_for(weights: Path, config_path: Path | None) -> SuperResolver:
    if not weights.is_file():
        raise DataError(f"weights file not found: {weights}")
    config = load_run_config(config_path).model if config_path else load_config(weights)
    return SuperResolver(load_weights(weights, config))


def cmd_train(args: argparse.Namespace) -> int:
    for flag, path in (("--resume", args.resume), ("--init", args.init)):
        if path is not None and not path.is_file():
            raise DataError(f"{flag} file not found: {path}")
    cfg: RunConfig = load_run_config(args.config, args.set)
    if cfg.data.train_dir is None:
        raise ConfigError("[data] train_dir is required for training")
    out_dir = Path(args.out) if args.out else Path("runs") / Path(args.config).stem
    data = load_dataset(cfg.data.train_dir, cfg.model.scale, cfg.data.mode)

    model = load_weights(args.init, cfg.model) if args.init else build_model(cfg.model, cfg.train.seed)
    on_eval = None
    if cfg.eval.data_dir is not None and cfg.train.eval_every:
        eval_data = load_dataset(cfg.eval.data_dir, cfg.model.scale, cfg.eval.mode)
        eval_log = out_dir / "eval_log.csv"

        def on_eval(state, iteration):
            report = evaluate(SuperResolver(state), eval_data, cfg.eval.protocol)
            row = pd.DataFrame([{"iteration": iteration, "psnr": report.mean_psnr, "ssim": report.mean_ssim}])
            row.to_csv(eval_log, mode="a", header=not eval_log.exists(), index=False)

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.toml").write_text(cfg.to_toml())
    _, losses = train(model, data, cfg.train, out_dir=out_dir, resume=args.resume, stop_at=args.stop_at, on_eval=on_eval)
    if len(losses):
        console.print(f"final loss: {losses.losses[-1]:.6f} after {losses.iterations[-1] + 1} iterations")
    console.print(f"outputs in {out_dir}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if args.bicubic:
        if args.scale is None:
            raise ConfigError("--bicubic needs --scale")
        model = BicubicUpscaler(args.scale)
    elif args.weights:
        model = _model_for(args.weights, args.config)
    else:
        raise ConfigError("pass --weights or --bicubic")
    protocol = EvalProtocol(
        y_channel=args.y_only, shave=args.shave, self_ensemble=args.self_ensemble, workers=args.workers
    )
    dataset = load_dataset(args.data, args.scale or model.scale, args.mode)
    report = evaluate(model, dataset, protocol)
    console.print(report.to_table())
    csv_path = args.csv or (args.weights.with_name(args.weights.name + ".eval.csv") if args.weights else None)
    if csv_path:
        report.write_csv(csv_path)
        console.print(f"report written to {csv_path}")
    return 0


def cmd_sr(args: argparse.Namespace) -> int:
    model = _model_for(args.weights, args.config)
    lr = read_image(args.input)
    sr = self_ensemble(model, lr) if args.self_ensemble else model(lr)
    write_image(args.output, sr)
    console.print(f"{args.input} {lr.shape[2]}×{lr.shape[1]} → {args.output} {sr.shape[2]}×{sr.shape[1]}")
    return 0


def cmd_count(args: argparse.Namespace) -> int:
    if args.config:
        config = load_run_config(args.config, args.set).model
    else:
        config = model_from_table({"variant": args.variant, "scale": args.scale})
    w, h = _out_size(args.out_size)
    params = count_params(config)
    madds = count_madds(config, h, w)
    console.print(f"params: {params} ({_human(params)})")
    console.print(f"madds: {madds} ({_human(madds)}) @ {w}x{h}")
    if args.breakdown:
        report = complexity_report(config, h, w)
        table = Table(title=f"{config.variant} ×{config.scale} @ {w}x{h}")
        for column in ("component", "params", "madds", "bias adds", "elementwise"):
            table.add_column(column, justify="left" if column == "component" else "right")
        for component, row in report.frame.iterrows():
            table.add_row(
                str(component),
                str(row["params"]),
                _human(int(row["madds"])),
                _human(int(row["bias_adds"])),
                _human(int(row["elementwise"])),
            )
        console.print(table)
    return 0


def check_network_gradients(
    width: int, blocks: int, seed: int, scale: int = 2, size: int = 6, coords: int = 4, eps: float = 1e-4
) -> dict[str, float]:
    """Finite-difference check of every parameter of a small float64 network."""
    with precision("float64"):
        config = ManConfig.create(n_blocks=blocks, width=width, scale=scale)
        state = build_model(config, seed, dtype="float64")
        rng = np.random.default_rng(seed)
        # larger than default init so every branch carries signal
        for tensor in state.params.values():
            tensor.data += rng.normal(0.0, 0.1, tensor.shape)
        lr = Tensor(rng.uniform(0.0, 1.0, (1, 3, size, size)))
        projection = Tensor(rng.normal(0.0, 1.0, (1, 3, size * scale, size * scale)))
        return grad_check_params(
            lambda: tensor_sum(mul(man_forward(lr, state), projection)), state.params, eps, coords, rng
        )


def cmd_gradcheck(args: argparse.Namespace) -> int:
    if args.width > GRADCHECK_MAX_WIDTH or args.width < 1 or args.blocks < 1:
        raise ConfigError(f"gradcheck needs 1 ≤ width ≤ {GRADCHECK_MAX_WIDTH} and at least one block")
    errors = check_network_gradients(args.width, args.blocks, args.seed, coords=args.coords)
    worst = max(errors, key=errors.get)
    console.print(f"max relative error: {errors[worst]:.3e} ({worst})")
    if errors[worst] >= TOLERANCE:
        raise NumericError(f"gradient check failed at {worst}: relative error {errors[worst]:.3e}")
    return 0


def cmd_degrade(args: argparse.Namespace) -> int:
    src, dst = Path(args.input), Path(args.output)
    if not src.is_dir():
        raise DataError(f"input directory {src} does not exist")
    paths = list_images(src)
    if not paths:
        raise DataError(f"no images in {src}")
    for path in paths:
        pair = degrade(read_image(path), args.scale, id=path.stem)
        write_image(dst / path.name, pair.lr)
    console.print(f"wrote {len(paths)} LR images ×{args.scale} to {dst}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mansr", description="Multi-scale attention network super-resolution kit")
    parser.add_argument("--threads", type=int, default=None, help="intra-op threads (1 = deterministic)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a run config")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path)
    p.add_argument("--resume", type=Path, help="checkpoint to continue from")
    p.add_argument("--init", type=Path, help="weights to start from (fine-tuning)")
    p.add_argument("--stop-at", type=int, help="stop after this many iterations")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="score a model on an image directory")
    p.add_argument("--weights", type=Path)
    p.add_argument("--bicubic", action="store_true", help="score the bicubic baseline instead")
    p.add_argument("--config", type=Path, help="run config whose [model] overrides the weight sidecar")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--mode", choices=["hr_only", "paired_dirs"], default="hr_only")
    p.add_argument("--scale", type=int)
    p.add_argument("--shave", type=int)
    p.add_argument("--y-only", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--self-ensemble", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", type=Path)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("sr", help="super-resolve one PNG")
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--config", type=Path)
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", dest="output", type=Path, required=True)
    p.add_argument("--self-ensemble", action="store_true")
    p.set_defaults(handler=cmd_sr)

    p = sub.add_parser("count", help="parameter and multiply-add counts")
    p.add_argument("--config", type=Path)
    p.add_argument("--variant", default="light")
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("--out-size", default="1280x720")
    p.add_argument("--breakdown", action="store_true")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.set_defaults(handler=cmd_count)

    p = sub.add_parser("gradcheck", help="finite-difference check through a small network")
    p.add_argument("--width", type=int, default=12)
    p.add_argument("--blocks", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--coords", type=int, default=4, help="coordinates checked per tensor")
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("degrade", help="write bicubic LR versions of a PNG directory")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", dest="output", type=Path, required=True)
    p.add_argument("--scale", type=int, required=True)
    p.set_defaults(handler=cmd_degrade)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run one command and map failures to exit codes."""
    args = build_parser().parse_args(argv)
    setup_logging()
    setup_telemetry()
    set_num_threads(args.threads or runtime.threads)
    tracer = get_tracer()
    try:
        with tracer.start_as_current_span(f"cli.{args.command}"):
            return args.handler(args)
    except ManError as e:
        log.error("command failed", command=args.command, error=str(e), exit_code=e.exit_code)
        console.print(f"[red]error:[/red] {e}", highlight=False)
        return e.exit_code
    except ValidationError as e:
        log.error("invalid configuration", command=args.command, error=str(e))
        console.print(f"[red]error:[/red] {e}", highlight=False)
        return ConfigError.exit_code
    except OSError as e:
        log.error("i/o failure", command=args.command, error=str(e))
        console.print(f"[red]error:[/red] {e}", highlight=False)
        return DataError.exit_code


def main() -> None:
    sys.exit(run())
