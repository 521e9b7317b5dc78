"""Dense float tensors with reverse-mode automatic differentiation.

A ``Graph`` is a tape: executing a primitive while a graph is active
records the node, and ``backward`` replays the tape in reverse.  With no
active graph the same primitives run as plain (cheap) numpy math, which is
what action selection and target evaluation use.

Primitive set: matmul, add, mul, relu, tanh, exp, log, sum, mean,
softmax-over-axis, abs, concat, slice, square-loss, plus ``reshape`` as a
zero-cost structural move.  Everything else (subtraction, clamping,
divisions by positive quantities) is composed from these.
"""

from __future__ import annotations

import os
from typing import Callable, Sequence

import numpy as np

from . import backend

__all__ = [
    "Tensor", "Graph", "GraphError", "NumericError", "record", "backward",
    "param", "const", "zeros", "add", "mul", "matmul", "relu", "tanh_",
    "exp_", "log_", "tsum", "tmean", "softmax", "tabs", "concat", "tslice",
    "reshape", "square_loss", "clamp", "set_strict_nan", "strict_nan_enabled",
]

_STRICT_NAN = os.environ.get("MARL_STRICT_NAN", "0") == "1"
_COUNTER = 0


class GraphError(RuntimeError):
    """Structural misuse: shape mismatch, backward without a tape, ..."""


class NumericError(FloatingPointError):
    """Non-finite value detected while strict NaN checking is enabled."""


def set_strict_nan(flag: bool) -> None:
    global _STRICT_NAN
    _STRICT_NAN = flag


def strict_nan_enabled() -> bool:
    return _STRICT_NAN


class Graph:
    """Recording tape; ``nodes`` is in topological (creation) order."""

    __slots__ = ("nodes",)

    def __init__(self) -> None:
        self.nodes: list[Tensor] = []


_ACTIVE: list[Graph] = []


class record:
    """Context manager activating a (fresh or given) tape."""

    __slots__ = ("graph",)

    def __init__(self, graph: Graph | None = None) -> None:
        self.graph = graph if graph is not None else Graph()

    def __enter__(self) -> Graph:
        _ACTIVE.append(self.graph)
        return self.graph

    def __exit__(self, *exc) -> None:
        _ACTIVE.pop()


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "_parents",
                 "_backward", "_tape", "name")

    def __init__(self, data: np.ndarray, requires_grad: bool = False,
                 name: str = "") -> None:
        self.data = data
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.op = "leaf"
        self._parents: tuple = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._tape: Graph | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = self.name or self.op
        return f"Tensor({tag}, shape={self.data.shape}, grad={self.grad is not None})"

    # operator sugar over the primitives
    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(self, other)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(self, other)
    def __matmul__(self, other): return matmul(self, other)
    def __neg__(self): return mul(self, -1.0)
    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)
    def __rsub__(self, other): return add(mul(self, -1.0), other)
    def __getitem__(self, key): return tslice(self, key)


def param(data, name: str = "", dtype=np.float32) -> Tensor:
    """Trainable leaf tensor."""
    return Tensor(np.ascontiguousarray(data, dtype=dtype), True, name)


def const(data, dtype=np.float32) -> Tensor:
    """Non-trainable leaf tensor."""
    return Tensor(np.ascontiguousarray(data, dtype=dtype), False)


def zeros(shape, requires_grad: bool = False, name: str = "",
          dtype=np.float32) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad, name)


def _node_id(op: str) -> str:
    global _COUNTER
    _COUNTER += 1
    return f"{op}#{_COUNTER}"


# below this element count the plain numpy expression beats the kernel
# dispatch overhead; both sides are bit-identical so the gate is free
KERNEL_MIN_SIZE = 8192


def _make(op: str, data: np.ndarray, parents: tuple,
          bwd_factory) -> Tensor:
    """Wrap a primitive's output; record it if a tape is active."""
    if _STRICT_NAN and not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite value produced by node {_node_id(op)}")
    out = Tensor(data)
    out.op = op
    if _ACTIVE:
        for p in parents:
            if p.requires_grad:
                out.requires_grad = True
                out._parents = parents
                out._backward = bwd_factory(out)
                tape = _ACTIVE[-1]
                tape.nodes.append(out)
                out._tape = tape
                break
    return out


def _acc(t: Tensor, g: np.ndarray, own: bool) -> None:
    """Accumulate gradient g (shape == t.shape) into t.grad."""
    if not t.requires_grad:
        return
    grad = t.grad
    if grad is None:
        if own and g.flags.writeable:
            t.grad = g
        else:
            t.grad = g.copy()
    elif grad.size < KERNEL_MIN_SIZE:
        grad += g
    else:
        backend.add_acc(grad, g)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum g down to `shape` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return np.ascontiguousarray(g)


def backward(out: Tensor) -> None:
    """Populate .grad on every contributing tensor of out's tape."""
    tape = out._tape
    if tape is None:
        raise GraphError("backward called on a tensor with no recorded graph "
                         "(run the forward computation inside record())")
    if out.data.size != 1:
        raise GraphError(f"backward requires a scalar output, got shape {out.data.shape}")
    if out.grad is None:
        out.grad = np.ones_like(out.data)
    else:
        out.grad += np.ones_like(out.data)
    for node in reversed(tape.nodes):
        if node.grad is not None and node._backward is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# primitives


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        data = a.data + b
        return _make("add", data, (a,), lambda out: lambda g: _acc(
            a, _unbroadcast(g, a.data.shape), False))
    data = a.data + b.data

    def factory(out):
        def bwd(g):
            _acc(a, _unbroadcast(g, a.data.shape), g.shape != a.data.shape)
            _acc(b, _unbroadcast(g, b.data.shape), g.shape != b.data.shape)
        return bwd

    return _make("add", data, (a, b), factory)


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        data = a.data * b

        def sfactory(out):
            def bwd(g):
                _acc(a, _unbroadcast(g * b, a.data.shape), True)
            return bwd

        return _make("mul", data, (a,), sfactory)
    data = a.data * b.data

    def factory(out):
        def bwd(g):
            big = g.size >= KERNEL_MIN_SIZE
            if a.requires_grad:
                if big and g.shape == a.data.shape == b.data.shape \
                        and a.grad is not None:
                    backend.mul_acc(a.grad, g, b.data)
                else:
                    _acc(a, _unbroadcast(g * b.data, a.data.shape), True)
            if b.requires_grad:
                if big and g.shape == b.data.shape == a.data.shape \
                        and b.grad is not None:
                    backend.mul_acc(b.grad, g, a.data)
                else:
                    _acc(b, _unbroadcast(g * a.data, b.data.shape), True)
        return bwd

    return _make("mul", data, (a, b), factory)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise GraphError(f"matmul needs >=2-D operands at node {_node_id('matmul')}: "
                         f"{ad.shape} @ {bd.shape}")
    if ad.shape[-1] != bd.shape[-2]:
        raise GraphError(f"matmul inner-dimension mismatch at node "
                         f"{_node_id('matmul')}: {ad.shape} @ {bd.shape}")
    data = np.matmul(ad, bd)

    def factory(out):
        def bwd(g):
            if a.requires_grad:
                ga = np.matmul(g, bd.swapaxes(-1, -2))
                _acc(a, _unbroadcast(ga, ad.shape), True)
            if b.requires_grad:
                gb = np.matmul(ad.swapaxes(-1, -2), g)
                _acc(b, _unbroadcast(gb, bd.shape), True)
        return bwd

    return _make("matmul", data, (a, b), factory)


def relu(a: Tensor) -> Tensor:
    data = backend.relu_fwd(a.data)

    def factory(out):
        def bwd(g):
            if a.grad is not None and g.size >= KERNEL_MIN_SIZE \
                    and g.shape == a.data.shape:
                backend.relu_bwd_acc(a.grad, g, a.data)
            else:
                _acc(a, g * (a.data > 0.0).astype(g.dtype), True)
        return bwd

    return _make("relu", data, (a,), factory)


def tanh_(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def factory(out):
        def bwd(g):
            if a.grad is not None and g.size >= KERNEL_MIN_SIZE \
                    and g.shape == a.data.shape:
                backend.tanh_bwd_acc(a.grad, g, data)
            else:
                _acc(a, g * (1.0 - data * data), True)
        return bwd

    return _make("tanh", data, (a,), factory)


def exp_(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def factory(out):
        def bwd(g):
            if a.grad is not None and g.size >= KERNEL_MIN_SIZE \
                    and g.shape == a.data.shape:
                backend.exp_bwd_acc(a.grad, g, data)
            else:
                _acc(a, g * data, True)
        return bwd

    return _make("exp", data, (a,), factory)


def log_(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def factory(out):
        def bwd(g):
            if a.grad is not None and g.size >= KERNEL_MIN_SIZE \
                    and g.shape == a.data.shape:
                backend.log_bwd_acc(a.grad, g, a.data)
            else:
                _acc(a, g / a.data, True)
        return bwd

    return _make("log", data, (a,), factory)


def tabs(a: Tensor) -> Tensor:
    data = np.abs(a.data)

    def factory(out):
        def bwd(g):
            if a.grad is not None and g.size >= KERNEL_MIN_SIZE \
                    and g.shape == a.data.shape:
                backend.abs_bwd_acc(a.grad, g, a.data)
            else:
                _acc(a, g * np.sign(a.data), True)
        return bwd

    return _make("abs", data, (a,), factory)


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def factory(out):
        def bwd(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            _acc(a, np.broadcast_to(g, a.data.shape).astype(g.dtype, copy=True), True)
        return bwd

    return _make("sum", data, (a,), factory)


def tmean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    data = a.data.mean(axis=axis, keepdims=keepdims)
    n = a.data.size if axis is None else a.data.shape[axis]

    def factory(out):
        def bwd(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            scaled = g / n
            _acc(a, np.broadcast_to(scaled, a.data.shape).astype(g.dtype, copy=True), True)
        return bwd

    return _make("mean", data, (a,), factory)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def factory(out):
        def bwd(g):
            dot = (g * data).sum(axis=axis, keepdims=True)
            _acc(a, data * (g - dot), True)
        return bwd

    return _make("softmax", data, (a,), factory)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise GraphError(f"concat of zero tensors at node {_node_id('concat')}")
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def factory(out):
        def bwd(g):
            offset = 0
            for p, size in zip(parts, sizes):
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(offset, offset + size)
                _acc(p, np.ascontiguousarray(g[tuple(idx)]), True)
                offset += size
        return bwd

    return _make("concat", data, tuple(parts), factory)


def tslice(a: Tensor, key) -> Tensor:
    data = np.ascontiguousarray(a.data[key])

    def factory(out):
        def bwd(g):
            if a.grad is None:
                full = np.zeros_like(a.data)
                full[key] = g
                _acc(a, full, True)
            else:
                a.grad[key] += g
        return bwd

    return _make("slice", data, (a,), factory)


def reshape(a: Tensor, shape) -> Tensor:
    data = a.data.reshape(shape)

    def factory(out):
        def bwd(g):
            _acc(a, np.ascontiguousarray(g.reshape(a.data.shape)), True)
        return bwd

    return _make("reshape", data, (a,), factory)


def square_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared difference over all elements."""
    if a.data.shape != b.data.shape:
        raise GraphError(f"square_loss shape mismatch at node "
                         f"{_node_id('square_loss')}: {a.data.shape} vs {b.data.shape}")
    diff = a.data - b.data
    data = np.asarray((diff * diff).mean(), dtype=a.data.dtype)
    n = diff.size

    def factory(out):
        def bwd(g):
            scale = 2.0 / n * float(g)
            if a.requires_grad:
                if a.grad is None:
                    a.grad = np.zeros_like(a.data)
                backend.sq_loss_bwd_acc(a.grad, diff, scale, 1.0)
            if b.requires_grad:
                if b.grad is None:
                    b.grad = np.zeros_like(b.data)
                backend.sq_loss_bwd_acc(b.grad, diff, scale, -1.0)
        return bwd

    return _make("square_loss", data, (a, b), factory)


# ---------------------------------------------------------------------------
# composed helpers


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Hard clamp composed from relu/add: min(max(a, lo), hi)."""
    lower = add(relu(add(a, -lo)), lo)
    return add(mul(relu(add(mul(lower, -1.0), hi)), -1.0), hi)


def reciprocal_pos(a: Tensor) -> Tensor:
    """1/a for strictly positive a, composed as exp(-log(a))."""
    return exp_(mul(log_(a), -1.0))
