"""Versioned binary weight and checkpoint files.

Layout (little-endian)::

    "MANW" | u32 version | u32 count | count × tensor | u32 crc32
    tensor = u16 name_len | name (utf-8) | u8 rank | u32 dims[rank] | u8 dtype | payload

A checkpoint is a complete weight file followed by an optimizer section::

    "OPTS" | u32 count | count × tensor (m.<name>, v.<name>) | u64 step | 32-byte rng state | u32 crc32

where the trailing CRC covers every preceding byte of the file. The model
config travels in a JSON sidecar ``<path>.json``.
"""

from __future__ import annotations

import struct
import zlib
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog

from ..arch import ManConfig, ModelState
from ..arch.network import param_shapes
from ..errors import ConfigError, WeightFormatError
from ..tensor import Tensor
from .adam import AdamState

log = structlog.get_logger()

MAGIC = b"MANW"
OPTS_MAGIC = b"OPTS"
VERSION = 1
RNG_STATE_BYTES = 32

_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def _encode_tensors(tensors: Mapping[str, np.ndarray]) -> bytes:
    out = bytearray(struct.pack("<I", len(tensors)))
    for name, array in tensors.items():
        if array.dtype not in _DTYPE_CODES:
            raise WeightFormatError(f"{name}: unsupported dtype {array.dtype}")
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded)) + encoded
        out += struct.pack("<B", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape)
        out += struct.pack("<B", _DTYPE_CODES[array.dtype])
        out += array.astype(array.dtype.newbyteorder("<"), copy=False).tobytes(order="C")
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise WeightFormatError(f"{self.path}: truncated file")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def check_crc(self) -> None:
        expected = zlib.crc32(self.data[:self.pos])
        (stored,) = self.unpack("<I")
        if stored != expected:
            raise WeightFormatError(f"{self.path}: CRC mismatch (stored {stored:#010x}, computed {expected:#010x})")

    def tensors(self) -> dict[str, np.ndarray]:
        (count,) = self.unpack("<I")
        out = {}
        for _ in range(count):
            (name_len,) = self.unpack("<H")
            name = self.take(name_len).decode("utf-8")
            (rank,) = self.unpack("<B")
            dims = self.unpack(f"<{rank}I")
            (code,) = self.unpack("<B")
            if code not in _CODE_DTYPES:
                raise WeightFormatError(f"{self.path}: {name} has unknown dtype code {code}")
            dtype = _CODE_DTYPES[code]
            size = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
            out[name] = np.frombuffer(self.take(size), dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))
        return out


def encode_weights(params: Mapping[str, np.ndarray]) -> bytes:
    body = MAGIC + struct.pack("<I", VERSION) + _encode_tensors(params)
    return body + struct.pack("<I", zlib.crc32(body))


def _read_weights(reader: _Reader) -> dict[str, np.ndarray]:
    if reader.take(4) != MAGIC:
        raise WeightFormatError(f"{reader.path}: not a weight file (bad magic)")
    (version,) = reader.unpack("<I")
    if version != VERSION:
        raise WeightFormatError(f"{reader.path}: unsupported format version {version}")
    tensors = reader.tensors()
    reader.check_crc()
    return tensors


def _read(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise WeightFormatError(f"cannot read {path}: {e}") from e


def check_against_config(tensors: Mapping[str, np.ndarray], config: ManConfig, path: Path) -> None:
    """Every expected tensor present with the expected shape, and nothing else."""
    expected = param_shapes(config)
    for name, shape in expected.items():
        if name not in tensors:
            raise WeightFormatError(f"{path}: missing tensor {name!r} required by the model config")
        if tuple(tensors[name].shape) != shape:
            raise WeightFormatError(f"{path}: tensor {name!r} has shape {tensors[name].shape}, config expects {shape}")
    extra = [name for name in tensors if name not in expected]
    if extra:
        raise WeightFormatError(f"{path}: unexpected tensor {extra[0]!r} for this model config")


def load_config(path: Path) -> ManConfig:
    sidecar = sidecar_path(Path(path))
    if not sidecar.exists():
        raise ConfigError(f"no model config for {path}: pass a config or keep {sidecar.name} next to it")
    return ManConfig.from_json(sidecar.read_text())


def save_weights(state: ModelState, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_weights({name: t.data for name, t in state.items()}))
    sidecar_path(path).write_text(state.config.model_dump_json(indent=2))
    log.info("weights saved", path=str(path), tensors=len(state), params=state.num_params)
    return path


def load_weights(path: Path | str, config: ManConfig | None = None) -> ModelState:
    """Load a weight file (or the weights of a checkpoint) and validate it against the config."""
    path = Path(path)
    config = config or load_config(path)
    tensors = _read_weights(_Reader(_read(path), path))
    check_against_config(tensors, config, path)
    order = param_shapes(config)
    return ModelState(config, {name: Tensor(tensors[name], requires_grad=True) for name in order})


@dataclass
class Checkpoint:
    state: ModelState
    adam: AdamState
    rng_state: bytes

    @property
    def step(self) -> int:
        return self.adam.step


def save_checkpoint(path: Path | str, state: ModelState, adam: AdamState, rng_state: bytes) -> Path:
    if len(rng_state) != RNG_STATE_BYTES:
        raise WeightFormatError(f"rng state must be {RNG_STATE_BYTES} bytes, got {len(rng_state)}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    moments = {f"m.{name}": adam.m[name] for name in state} | {f"v.{name}": adam.v[name] for name in state}
    body = encode_weights({name: t.data for name, t in state.items()})
    body += OPTS_MAGIC + _encode_tensors(moments) + struct.pack("<Q", adam.step) + rng_state
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(body + struct.pack("<I", zlib.crc32(body)))
    tmp.replace(path)
    sidecar_path(path).write_text(state.config.model_dump_json(indent=2))
    log.info("checkpoint saved", path=str(path), step=adam.step)
    return path


def load_checkpoint(path: Path | str, config: ManConfig | None = None) -> Checkpoint:
    path = Path(path)
    config = config or load_config(path)
    reader = _Reader(_read(path), path)
    tensors = _read_weights(reader)
    check_against_config(tensors, config, path)
    if reader.pos == len(reader.data) or reader.take(4) != OPTS_MAGIC:
        raise WeightFormatError(f"{path}: no optimizer section; this is a plain weight file")
    moments = reader.tensors()
    (step,) = reader.unpack("<Q")
    rng_state = reader.take(RNG_STATE_BYTES)
    reader.check_crc()

    order = param_shapes(config)
    adam = AdamState(step=step)
    for name in order:
        for kind, target in (("m", adam.m), ("v", adam.v)):
            key = f"{kind}.{name}"
            if key not in moments or moments[key].shape != tensors[name].shape:
                raise WeightFormatError(f"{path}: optimizer moment {key!r} missing or mis-shaped")
            target[name] = moments[key]
    state = ModelState(config, {name: Tensor(tensors[name], requires_grad=True) for name in order})
    return Checkpoint(state, adam, rng_state)
