"""
Reverse-mode automatic differentiation over 64-bit numpy arrays.

Operations executed while a tape is active are appended to it; ``backward``
walks the tape in exact reverse order and accumulates gradients.
"""
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

ArrayLike = Union[np.ndarray, Sequence, float, int]


class ShapeError(ValueError):
    """Raised when operand shapes do not conform for an op"""


class DomainError(ValueError):
    """Raised when an op is evaluated outside its domain"""


class GraphError(RuntimeError):
    """Raised for an invalid backward request"""


class Tensor:
    """Row-major float64 values with an optional gradient buffer"""

    def __init__(self, values: ArrayLike, requires_grad: bool = False, name: Optional[str] = None):
        self.values = np.array(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return int(self.values.size)

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item: expected a single value, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.values.shape:
            raise ShapeError(f"accumulate: gradient shape {grad.shape} does not match {self.shape}")
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def __matmul__(self, other: 'Tensor') -> 'Tensor':
        return matmul(self, other)

    def __add__(self, other: 'Tensor') -> 'Tensor':
        return add(self, other)

    def __sub__(self, other: 'Tensor') -> 'Tensor':
        return sub(self, other)

    def __mul__(self, other: 'Tensor') -> 'Tensor':
        return mul(self, other)

    def __neg__(self) -> 'Tensor':
        return scale(self, -1.0)

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class TapeRecord:
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward_fn: BackwardFn


class Tape:
    """Ordered record of executed operations"""

    def __init__(self):
        self.records: List[TapeRecord] = []

    def record(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor, backward_fn: BackwardFn) -> None:
        self.records.append(TapeRecord(op, inputs, output, backward_fn))

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, tensor: Tensor) -> bool:
        return any(record.output is tensor for record in self.records)

    def ops(self) -> List[str]:
        return [record.op for record in self.records]


_active_tapes: List[Tape] = []


@contextmanager
def recording(tape: Tape) -> Iterator[Tape]:
    """Record every op executed inside the block onto ``tape``"""
    _active_tapes.append(tape)
    try:
        yield tape
    finally:
        _active_tapes.pop()


def active_tape() -> Optional[Tape]:
    return _active_tapes[-1] if _active_tapes else None


def _emit(op: str, inputs: Tuple[Tensor, ...], values: np.ndarray, backward_fn: BackwardFn) -> Tensor:
    out = Tensor(values, requires_grad=any(t.requires_grad for t in inputs))
    tape = active_tape()
    if tape is not None and out.requires_grad:
        tape.record(op, inputs, out, backward_fn)
    return out


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def backward(tape: Tape, root: Tensor) -> None:
    """Fill ``grad`` of every requires_grad tensor reachable from ``root``"""
    if root.size != 1:
        raise GraphError(f"backward: root must be scalar, got shape {root.shape}")
    if root not in tape:
        raise GraphError("backward: root was not recorded on this tape")

    root.accumulate(np.ones_like(root.values))
    for record in reversed(tape.records):
        out_grad = record.output.grad
        if out_grad is None:
            continue
        input_grads = record.backward_fn(out_grad)
        for tensor, grad in zip(record.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            tensor.accumulate(grad)


# Broadcasting: the smaller operand must match the trailing axes of the larger one

def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    small, large = (a, b) if a.values.ndim <= b.values.ndim else (b, a)
    if small.values.ndim and large.shape[large.values.ndim - small.values.ndim:] != small.shape:
        raise ShapeError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    lead = grad.ndim - len(shape)
    if lead > 0:
        grad = grad.sum(axis=tuple(range(lead)))
    return grad.reshape(shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")

    def _backward(g):
        return g @ b.values.T, a.values.T @ g

    return _emit('matmul', (a, b), a.values @ b.values, _backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast('add', a, b)

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _emit('add', (a, b), a.values + b.values, _backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast('sub', a, b)

    def _backward(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return _emit('sub', (a, b), a.values - b.values, _backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast('mul', a, b)

    def _backward(g):
        return _unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)

    return _emit('mul', (a, b), a.values * b.values, _backward)


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)

    def _backward(g):
        return (g * factor,)

    return _emit('scale', (a,), a.values * factor, _backward)


def embedding_gather(table: Tensor, indices: Iterable[int]) -> Tensor:
    """Select rows of ``table``; repeated indices accumulate on the way back"""
    idx = np.asarray(list(indices), dtype=np.int64)
    if table.values.ndim != 2:
        raise ShapeError(f"embedding_gather: table must be 2-D, got shape {table.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(f"embedding_gather: index out of range for table shape {table.shape}")

    def _backward(g):
        grad = np.zeros_like(table.values)
        np.add.at(grad, idx, g)
        return (grad,)

    return _emit('embedding_gather', (table,), table.values[idx], _backward)


def softmax(a: Tensor) -> Tensor:
    if not np.all(np.isfinite(a.values)):
        raise DomainError("softmax: input contains non-finite values")
    shifted = a.values - a.values.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=-1, keepdims=True)

    def _backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _emit('softmax', (a,), out, _backward)


def log(a: Tensor) -> Tensor:
    if np.any(a.values <= 0):
        raise DomainError(f"log: input must be positive, got minimum {a.values.min()!r}")

    def _backward(g):
        return (g / a.values,)

    return _emit('log', (a,), np.log(a.values), _backward)


def clamp_min(a: Tensor, floor: float) -> Tensor:
    mask = a.values > floor

    def _backward(g):
        return (g * mask,)

    return _emit('clamp_min', (a,), np.maximum(a.values, floor), _backward)


def _reduce_backward(g: np.ndarray, shape: Tuple[int, ...], axis: Optional[int], keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape).copy()


def sum(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    def _backward(g):
        return (_reduce_backward(g, a.shape, axis, keepdims),)

    return _emit('sum', (a,), np.asarray(a.values.sum(axis=axis, keepdims=keepdims)), _backward)


def mean(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else a.shape[axis]

    def _backward(g):
        return (_reduce_backward(g, a.shape, axis, keepdims) / count,)

    return _emit('mean', (a,), np.asarray(a.values.mean(axis=axis, keepdims=keepdims)), _backward)


def relu(a: Tensor) -> Tensor:
    mask = a.values > 0

    def _backward(g):
        return (g * mask,)

    return _emit('relu', (a,), a.values * mask, _backward)


def transpose(a: Tensor) -> Tensor:
    if a.values.ndim != 2:
        raise ShapeError(f"transpose: expected a 2-D tensor, got shape {a.shape}")

    def _backward(g):
        return (g.T,)

    return _emit('transpose', (a,), a.values.T, _backward)


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    try:
        values = a.values.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view shape {a.shape} as {shape}") from exc

    def _backward(g):
        return (g.reshape(a.shape),)

    return _emit('reshape', (a,), values, _backward)


def layer_norm(x: Tensor, gain: Optional[Tensor] = None, bias: Optional[Tensor] = None,
               eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then apply optional gain and bias"""
    width = x.shape[-1]
    for param, label in ((gain, 'gain'), (bias, 'bias')):
        if param is not None and param.shape != (width,):
            raise ShapeError(f"layer_norm: {label} shape {param.shape} does not match input shape {x.shape}")

    mu = x.values.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(x.values.var(axis=-1, keepdims=True) + eps)
    xhat = (x.values - mu) * inv_std
    out = xhat
    if gain is not None:
        out = out * gain.values
    if bias is not None:
        out = out + bias.values

    inputs = tuple(t for t in (x, gain, bias) if t is not None)

    def _backward(g):
        dxhat = g * gain.values if gain is not None else g
        dx = inv_std / width * (
            width * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )
        grads = [dx]
        if gain is not None:
            grads.append(_unbroadcast(g * xhat, gain.shape))
        if bias is not None:
            grads.append(_unbroadcast(g, bias.shape))
        return grads

    return _emit('layer_norm', inputs, out, _backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ShapeError("concat: no tensors given")
    ndim = tensors[0].values.ndim
    axis = axis % ndim
    for t in tensors[1:]:
        other = tuple(d for i, d in enumerate(t.shape) if i != axis)
        first = tuple(d for i, d in enumerate(tensors[0].shape) if i != axis)
        if t.values.ndim != ndim or other != first:
            raise ShapeError(f"concat: shapes {tensors[0].shape} and {t.shape} do not conform on axis {axis}")
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _backward(g):
        return np.split(g, bounds, axis=axis)

    return _emit('concat', tuple(tensors), np.concatenate([t.values for t in tensors], axis=axis), _backward)
