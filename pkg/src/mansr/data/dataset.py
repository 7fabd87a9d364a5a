"""Image directory ingestion and the deterministic training batch stream."""

from __future__ import annotations

from collections import deque
from collections.abc import Iterator
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import structlog

from ..errors import DataError
from ..tensor import Tensor
from .image import list_images, read_image
from .pipeline import ImagePair, PatchBatch, augment, crop_to_scale, degrade, sample_patch

log = structlog.get_logger()

DatasetMode = Literal["paired_dirs", "hr_only"]


@dataclass
class DatasetIndex:
    root: Path
    scale: int
    mode: DatasetMode
    pairs: list[ImagePair] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, i: int) -> ImagePair:
        return self.pairs[i]

    def __iter__(self) -> Iterator[ImagePair]:
        return iter(self.pairs)

    @property
    def lr_source(self) -> str:
        """Where the LR inputs came from, for reports."""
        return "provided LR files" if self.mode == "paired_dirs" else "bicubic degradation"

    def subset(self, ids: list[str]) -> DatasetIndex:
        wanted = set(ids)
        return DatasetIndex(self.root, self.scale, self.mode, [p for p in self.pairs if p.id in wanted])


def _hr_dir(root: Path) -> Path:
    return root / "HR" if (root / "HR").is_dir() else root


def _paired(root: Path, hr: np.ndarray, lr_path: Path, hr_path: Path, scale: int) -> ImagePair:
    lr = read_image(lr_path)
    _, lh, lw = lr.shape
    _, h, w = hr.shape
    if not (lh * scale <= h < (lh + 1) * scale and lw * scale <= w < (lw + 1) * scale):
        raise DataError(
            f"{lr_path.name}: lr {lh}×{lw} does not match hr {h}×{w} at ×{scale} ({hr_path.relative_to(root)})"
        )
    hr = np.ascontiguousarray(crop_to_scale(hr, scale)[:, : lh * scale, : lw * scale])
    return ImagePair(hr=hr, lr=lr, scale=scale, id=hr_path.stem)


def load_dataset(directory: Path | str, scale: int, mode: DatasetMode = "hr_only") -> DatasetIndex:
    """Index a `<root>/HR` directory, pairing with `<root>/LRx{s}` or synthesizing LR by degradation."""
    root = Path(directory)
    if not root.is_dir():
        raise DataError(f"dataset directory {root} does not exist")
    hr_paths = list_images(_hr_dir(root))
    if not hr_paths:
        raise DataError(f"no images in {_hr_dir(root)}")

    lr_dir = root / f"LRx{scale}"
    if mode == "paired_dirs" and not lr_dir.is_dir():
        raise DataError(f"paired mode needs {lr_dir}")

    index = DatasetIndex(root, scale, mode)
    for hr_path in hr_paths:
        hr = read_image(hr_path)
        if mode == "hr_only":
            index.pairs.append(degrade(hr, scale, id=hr_path.stem))
            continue
        lr_path = lr_dir / hr_path.name
        if not lr_path.exists():
            raise DataError(f"{hr_path.name}: no matching LR file in {lr_dir}")
        index.pairs.append(_paired(root, hr, lr_path, hr_path, scale))
    log.info("dataset loaded", root=str(root), images=len(index), scale=scale, mode=mode)
    return index


def batch_rng(seed: int, iteration: int) -> np.random.Generator:
    """Generator for one iteration's batch; independent of how many batches were drawn before."""
    return np.random.default_rng(np.random.SeedSequence([seed, iteration]))


def rng_state_bytes(rng: np.random.Generator) -> bytes:
    """32-byte snapshot of a PCG64 generator: 128-bit state then 128-bit increment."""
    state = rng.bit_generator.state["state"]
    return int(state["state"]).to_bytes(16, "little") + int(state["inc"]).to_bytes(16, "little")


class BatchStream:
    """Ordered, seed-deterministic stream of augmented patch batches with thread prefetch.

    Batch ``t`` depends only on (seed, t), so worker count and prefetch depth never
    change what the trainer sees.
    """

    def __init__(
        self,
        data: DatasetIndex,
        batch: int,
        patch: int,
        seed: int,
        augment_patches: bool = True,
        workers: int = 2,
    ):
        if len(data) == 0:
            raise DataError("cannot form a batch from an empty dataset")
        too_small = [p.id for p in data if min(p.lr.shape[1:]) < patch]
        if len(too_small) == len(data):
            raise DataError(f"every image is smaller than the {patch}px patch (e.g. {too_small[0]})")
        self.data = data
        self.batch = batch
        self.patch = patch
        self.seed = seed
        self.augment_patches = augment_patches
        self.workers = max(1, workers)
        self._eligible = [i for i, p in enumerate(data) if min(p.lr.shape[1:]) >= patch]

    def batch_at(self, iteration: int) -> PatchBatch:
        rng = batch_rng(self.seed, iteration)
        state = rng_state_bytes(rng)
        lr_patches, hr_patches = [], []
        for _ in range(self.batch):
            pair = self.data[self._eligible[int(rng.integers(0, len(self._eligible)))]]
            lr, hr = sample_patch(pair, self.patch, rng)
            if self.augment_patches:
                lr, hr = augment(lr, hr, rng)
            lr_patches.append(lr)
            hr_patches.append(hr)
        return PatchBatch(Tensor(np.stack(lr_patches)), Tensor(np.stack(hr_patches)), iteration, state)

    def iterate(self, start: int, stop: int) -> Iterator[PatchBatch]:
        if self.workers == 1:
            for t in range(start, stop):
                yield self.batch_at(t)
            return
        with ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="mansr-data") as pool:
            pending: deque[Future[PatchBatch]] = deque()
            next_t = start
            while next_t < stop or pending:
                while next_t < stop and len(pending) < self.workers * 2:
                    pending.append(pool.submit(self.batch_at, next_t))
                    next_t += 1
                yield pending.popleft().result()
