"""Tape-based reverse-mode differentiation over float64 numpy arrays.

The primitive set is deliberately small: affine maps, rectifier, tanh, exp,
log, square, sum, mean, elementwise minimum, plus elementwise arithmetic and
the structural ops (concatenation, column slicing) needed to wire networks
together. Every primitive checks its output and raises :class:`NumericError`
naming itself if a NaN or Inf appears.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ctrl.errors import NumericError, RejectedInputError


class Tensor:
    """A node in the computation graph.

    Leaves created with ``requires_grad=True`` accumulate ``grad`` when
    :func:`backward` is called on a scalar that depends on them.
    """

    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "op")
    # make ndarray <op> Tensor defer to the Tensor's reflected operator
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, parents=(), backward_fn=None, op: str = "leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.data.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __getitem__(self, index):
        return take(self, index)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn, op: str) -> Tensor:
    if not np.isfinite(data).all():
        raise NumericError(op)
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward_fn, op)
    return Tensor(data, op=op)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- elementwise arithmetic ------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), backward, "mul")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


# -- the differentiable primitives -----------------------------------------


def affine(x, weight, bias) -> Tensor:
    """``x @ weight + bias`` for a batch ``x`` of shape (n, in) or a single vector."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.shape[-1] != weight.shape[0]:
        raise RejectedInputError(f"affine: input dim {x.shape[-1]} != weight rows {weight.shape[0]}")

    def backward(g):
        gx = g @ weight.data.T if x.requires_grad else None
        if weight.requires_grad:
            gw = np.outer(x.data, g) if x.data.ndim == 1 else x.data.T @ g
        else:
            gw = None
        gb = _unbroadcast(g, bias.shape) if bias.requires_grad else None
        return gx, gw, gb

    return _make(x.data @ weight.data + bias.data, (x, weight, bias), backward, "affine")


def relu(x) -> Tensor:
    x = as_tensor(x)
    out = np.maximum(x.data, 0.0)
    return _make(out, (x,), lambda g: (g * (out > 0),), "relu")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _make(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def exp(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        out = np.exp(x.data)
    return _make(out, (x,), lambda g: (g * out,), "exp")


def log(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)
    return _make(out, (x,), lambda g: (g / x.data,), "log")


def square(x) -> Tensor:
    x = as_tensor(x)
    return _make(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,), "square")


def sum(x, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return _make(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), backward, "sum")


def mean(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else x.shape[axis]

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape),)

    return _make(np.mean(x.data, axis=axis, keepdims=keepdims), (x,), backward, "mean")


def minimum(a, b) -> Tensor:
    """Elementwise minimum; ties route the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data <= b.data

    def backward(g):
        return _unbroadcast(g * pick_a, a.shape), _unbroadcast(g * ~pick_a, b.shape)

    return _make(np.minimum(a.data, b.data), (a, b), backward, "min")


def maximum(a, b) -> Tensor:
    return neg(minimum(neg(a), neg(b)))


# -- structural ------------------------------------------------------------


def concat(parts: Sequence, axis: int = -1) -> Tensor:
    parts = tuple(as_tensor(p) for p in parts)
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(np.concatenate([p.data for p in parts], axis=axis), parts, backward, "concat")


def take(x, index) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return _make(x.data[index], (x,), backward, "take")


# -- driver ----------------------------------------------------------------


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every leaf requiring grad."""
    if root.data.size != 1:
        raise RejectedInputError("backward() needs a scalar root")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))

    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node.backward_fn is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node.backward_fn(node.grad)):
            if g is None or not parent.requires_grad:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g


def value_and_grad(
    fn: Callable[..., Tensor | tuple[Tensor, object]],
    params: Sequence[np.ndarray],
    has_aux: bool = False,
):
    """Evaluate ``fn(leaves)`` and differentiate it with respect to ``params``.

    ``fn`` receives a list of leaf tensors wrapping ``params`` and must return
    a scalar tensor, or ``(scalar, aux)`` when ``has_aux`` is set. Returns
    ``(value, grads)`` or ``(value, grads, aux)``.
    """
    leaves = [Tensor(p, requires_grad=True) for p in params]
    out = fn(leaves)
    loss, aux = out if has_aux else (out, None)
    backward(loss)
    grads = [np.zeros_like(leaf.data) if leaf.grad is None else np.array(leaf.grad) for leaf in leaves]
    for g in grads:
        if not np.isfinite(g).all():
            raise NumericError("backward")
    if has_aux:
        return loss.item(), grads, aux
    return loss.item(), grads
