"""Dense tensors with tape-based reverse-mode differentiation.

Operations executed while a :class:`Tape` is active (``with tape: ...``) are
recorded on it whenever one of their inputs requires a gradient.  Calling
:func:`backward` replays the recorded rules in reverse order and accumulates
gradients into every leaf tensor with ``requires_grad=True``.

Broadcasting is limited to tensor-vs-scalar, plus the row-broadcast bias in
:func:`linear`.
"""

from __future__ import annotations

import numbers
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionError

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "matmul",
    "linear",
    "add",
    "sub",
    "mul",
    "scale",
    "square",
    "elu",
    "sum_rows",
    "take_rows",
    "mean",
    "mse",
]


class Tensor:
    """A float64 array that can take part in reverse-mode differentiation."""

    __slots__ = ("data", "requires_grad", "grad", "_tape", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._tape: Tape | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def backward(self) -> None:
        if self._tape is None:
            raise ContractError("tensor was not produced on a recording tape")
        backward(self, self._tape)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, numbers.Real):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


@dataclass
class _Node:
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    op: str


_local = threading.local()


def _stack() -> list["Tape"]:
    if not hasattr(_local, "tapes"):
        _local.tapes = []
    return _local.tapes


class Tape:
    """Ordered record of differentiable operations.

    Nodes are appended in execution order, so every node's inputs are either
    leaves or outputs of earlier nodes.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self._index: dict[int, int] = {}

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _stack().remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, inputs, output: Tensor, backward_fn, op: str) -> None:
        self._index[id(output)] = len(self.nodes)
        self.nodes.append(_Node(tuple(inputs), output, backward_fn, op))
        output._tape = self

    def produced(self, t: Tensor) -> bool:
        i = self._index.get(id(t))
        return i is not None and self.nodes[i].output is t


def _current_tape() -> Tape | None:
    stack = _stack()
    return stack[-1] if stack else None


def _result(data: np.ndarray, inputs: Sequence[Tensor], backward_fn, op: str) -> Tensor:
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    tape = _current_tape()
    if needs and tape is not None:
        tape.record(inputs, out, backward_fn, op)
    return out


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def backward(loss: Tensor, tape: Tape) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every recorded leaf.

    Intermediate gradients live only for the duration of the call, so two
    consecutive calls add the same gradient to each leaf twice.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not tape.produced(loss):
        raise ContractError("loss was not produced on this tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    stop = tape._index[id(loss)]
    for node in reversed(tape.nodes[: stop + 1]):
        g_out = grads.pop(id(node.output), None)
        if g_out is None:
            continue
        in_grads = node.backward_fn(g_out)
        for inp, g in zip(node.inputs, in_grads):
            if g is None or not inp.requires_grad:
                continue
            key = id(inp)
            if tape.produced(inp):
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
            else:
                inp.grad = g.copy() if inp.grad is None else inp.grad + g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of ``a`` [n x k] and ``b`` [k x m]."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    A, B = a.data, b.data

    def _backward(g):
        ga = g @ B.T if a.requires_grad else None
        gb = A.T @ g if b.requires_grad else None
        return ga, gb

    return _result(A @ B, (a, b), _backward, "matmul")


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map ``x @ weight.T + bias`` with ``weight`` stored [out x in]."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise DimensionError(f"linear: input shape {x.shape} does not match weight shape {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise DimensionError(f"linear: bias shape {bias.shape} does not match weight shape {weight.shape}")
    X, W = x.data, weight.data

    def _backward(g):
        gx = g @ W if x.requires_grad else None
        return gx, g.T @ X, g.sum(axis=0)

    return _result(X @ W.T + bias.data, (x, weight, bias), _backward, "linear")


def _binary_shapes(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} are not broadcastable")


def _reduce_to(g: np.ndarray, t: Tensor) -> np.ndarray:
    if g.shape == t.shape:
        return g
    return np.full(t.shape, g.sum())


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("add", a, b)

    def _backward(g):
        return _reduce_to(g, a), _reduce_to(g, b)

    return _result(a.data + b.data, (a, b), _backward, "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("sub", a, b)

    def _backward(g):
        return _reduce_to(g, a), _reduce_to(-g, b)

    return _result(a.data - b.data, (a, b), _backward, "sub")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("mul", a, b)
    A, B = a.data, b.data

    def _backward(g):
        return _reduce_to(g * B, a), _reduce_to(g * A, b)

    return _result(A * B, (a, b), _backward, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def _backward(g):
        return (c * g,)

    return _result(c * a.data, (a,), _backward, "scale")


def square(a: Tensor) -> Tensor:
    A = a.data

    def _backward(g):
        return (2.0 * A * g,)

    return _result(A * A, (a,), _backward, "square")


def elu(x: Tensor) -> Tensor:
    """x for x > 0, exp(x) - 1 otherwise."""
    X = x.data
    out = np.maximum(X, 0.0) + np.expm1(np.minimum(X, 0.0))

    def _backward(g):
        # slope is 1 on the positive side and exp(x) = out + 1 on the other
        return (g * (np.minimum(out, 0.0) + 1.0),)

    return _result(out, (x,), _backward, "elu")


def sum_rows(a: Tensor) -> Tensor:
    """Sum a [n x k] tensor over its columns, giving [n]."""
    if a.data.ndim != 2:
        raise DimensionError(f"sum_rows: expected a matrix, got shape {a.shape}")
    k = a.shape[1]

    def _backward(g):
        return (np.repeat(g[:, None], k, axis=1),)

    return _result(a.data.sum(axis=1), (a,), _backward, "sum_rows")


def take_rows(a: Tensor, index) -> Tensor:
    """Gather rows ``a[index]``; repeated indices accumulate in the backward pass."""
    idx = np.asarray(index, dtype=np.intp)
    shape = a.shape

    def _backward(g):
        if len(shape) == 1:
            return (np.bincount(idx, weights=g, minlength=shape[0]),)
        out = np.empty(shape)
        for j in range(shape[1]):
            out[:, j] = np.bincount(idx, weights=g[:, j], minlength=shape[0])
        return (out,)

    return _result(a.data[idx], (a,), _backward, "take_rows")


def mean(a: Tensor) -> Tensor:
    n = a.size

    def _backward(g):
        return (np.full(a.shape, float(g) / n),)

    return _result(np.asarray(a.data.mean()), (a,), _backward, "mean")


def mse(pred: Tensor, target) -> Tensor:
    """Mean of squared differences, differentiable with respect to ``pred``."""
    target = _as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"mse: prediction shape {pred.shape} differs from target shape {target.shape}")
    if pred.size == 0:
        raise ContractError("mse of empty tensors")
    r = pred.data - target.data
    n = r.size

    def _backward(g):
        d = (2.0 * float(g) / n) * r
        return d, -d

    return _result(np.asarray(np.mean(r * r)), (pred, target), _backward, "mse")
