"""Tensor value type, the recording tape and numeric precision/threading controls."""

from __future__ import annotations

from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass

import numpy as np
import structlog

from ..config import runtime
from ..errors import NumericError, TapeError

log = structlog.get_logger()

_DTYPES = {"float32": np.float32, "float64": np.float64}

_default_dtype: ContextVar[type[np.floating]] = ContextVar("mansr_dtype", default=np.float32)
_active_tape: ContextVar["Tape | None"] = ContextVar("mansr_tape", default=None)
_threads = runtime.threads
_pool: ThreadPoolExecutor | None = None


def get_default_dtype() -> type[np.floating]:
    return _default_dtype.get()


@contextmanager
def precision(dtype: str) -> Iterator[None]:
    """Switch the dtype used for new tensors ("float32" for training, "float64" for checks)."""
    token = _default_dtype.set(_DTYPES[dtype])
    try:
        yield
    finally:
        _default_dtype.reset(token)


def set_num_threads(threads: int) -> None:
    """Set intra-op parallelism. One thread is the deterministic reference mode."""
    global _threads, _pool
    threads = max(1, int(threads))
    if threads != _threads and _pool is not None:
        _pool.shutdown(wait=True)
        _pool = None
    _threads = threads
    log.debug("intra-op threads set", threads=threads)


def get_num_threads() -> int:
    return _threads


def parallel_map(fn: Callable[[int], np.ndarray], count: int) -> list[np.ndarray]:
    """Run fn over range(count) on the op thread pool, results in index order."""
    global _pool
    if _threads == 1 or count == 1:
        return [fn(i) for i in range(count)]
    if _pool is None:
        _pool = ThreadPoolExecutor(max_workers=_threads, thread_name_prefix="mansr-op")
    return list(_pool.map(fn, range(count)))


class Tensor:
    """Dense array with an optional gradient.

    Activations are (n, c, h, w); parameter vectors are 1-d; losses are 0-d.
    Data is never mutated by ops; only ``grad`` accumulates and optimizers
    update parameter ``data`` in place between steps.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_tape", "_generation")

    def __init__(
        self,
        data: np.ndarray | Sequence | float,
        requires_grad: bool = False,
        name: str | None = None,
    ):
        if isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating):
            array = np.ascontiguousarray(data)
        else:
            array = np.ascontiguousarray(np.asarray(data, dtype=get_default_dtype()))
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._tape: Tape | None = None
        self._generation = 0

    @classmethod
    def zeros(cls, shape: Sequence[int], requires_grad: bool = False) -> Tensor:
        return cls(np.zeros(tuple(shape), dtype=get_default_dtype()), requires_grad)

    @classmethod
    def ones(cls, shape: Sequence[int], requires_grad: bool = False) -> Tensor:
        return cls(np.ones(tuple(shape), dtype=get_default_dtype()), requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._tape is None

    def item(self) -> float:
        if self.data.size != 1:
            raise TapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise TapeError(
                f"gradient shape {grad.shape} does not match tensor shape {self.shape}"
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"


BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class _Node:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Ordered record of differentiable operations.

    Ops executed inside ``with Tape() as tape:`` whose inputs require gradients
    are recorded. ``backward`` replays the record in reverse, accumulating
    into every requires_grad leaf once per use.
    """

    def __init__(self):
        self._nodes: list[_Node] = []
        self._generation = 0
        self._tokens: list = []

    def __enter__(self) -> Tape:
        self._tokens.append(_active_tape.set(self))
        return self

    def __exit__(self, *exc) -> None:
        _active_tape.reset(self._tokens.pop())

    def __len__(self) -> int:
        return len(self._nodes)

    def record(self, op: str, inputs: tuple[Tensor, ...], output: Tensor, backward: BackwardFn) -> None:
        for tensor in inputs:
            _check_live(tensor)
        output._tape = self
        output._generation = self._generation
        self._nodes.append(_Node(op, inputs, output, backward))

    def reset(self) -> None:
        """Drop all recorded ops. Tensors produced before the reset become unusable."""
        self._nodes.clear()
        self._generation += 1

    def backward(self, loss: Tensor) -> None:
        if loss.size != 1:
            raise TapeError(f"loss must be scalar, got shape {loss.shape}")
        if loss._tape is not self:
            raise TapeError("loss was not produced on this tape")
        _check_live(loss)

        pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self._nodes):
            grad_out = pending.pop(id(node.output), None)
            if grad_out is None:
                continue
            input_grads = node.backward(grad_out)
            for tensor, grad in zip(node.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if tensor.is_leaf:
                    tensor.accumulate_grad(grad)
                elif id(tensor) in pending:
                    pending[id(tensor)] = pending[id(tensor)] + grad
                else:
                    pending[id(tensor)] = grad


def _check_live(tensor: Tensor) -> None:
    owner = tensor._tape
    if owner is not None and tensor._generation != owner._generation:
        raise TapeError("tensor used after tape reset")


def active_tape() -> Tape | None:
    return _active_tape.get()


def backward(tape: Tape, loss: Tensor) -> None:
    """Populate ``grad`` of every requires_grad leaf reachable from ``loss``."""
    tape.backward(loss)


def check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"{op} produced non-finite values")


def record(op: str, inputs: tuple[Tensor, ...], out: np.ndarray, backward_fn: BackwardFn) -> Tensor:
    """Wrap an op result, recording it on the active tape when any input needs gradients."""
    check_finite(out, op)
    for tensor in inputs:
        _check_live(tensor)
    tape = active_tape()
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    result = Tensor(out, requires_grad=needs_grad)
    if needs_grad:
        tape.record(op, inputs, result, backward_fn)
    return result
