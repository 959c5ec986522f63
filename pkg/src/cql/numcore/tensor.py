"""Reverse-mode differentiable tensors over float64 numpy arrays.

Scope is exactly what the decoder, heads and losses need: dense 64-bit
arrays, a handful of primitives, and a topologically ordered backward pass.
No views, no in-place graph ops, no dtype zoo. Tensors are immutable values;
only the optimizer writes into parameter storage between steps.

Gradient semantics: backward() adds d(loss)/d(node) into .grad of every
tensor on the path that requires grad. Calling backward twice without
zeroing accumulates, which is what lets a trainer do gradient accumulation
explicitly.
"""
from __future__ import annotations

import numpy as np

from ..errors import (
    AxisOutOfRange,
    DomainError,
    IndexOutOfRange,
    NotScalar,
    ShapeMismatch,
)

Array = np.ndarray


def _asarray(data) -> Array:
    arr = np.asarray(data, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise DomainError("non-finite values rejected at op boundary")
    return arr


def _unbroadcast(g: Array, shape: tuple) -> Array:
    # reduce a broadcast gradient back down to the operand's shape
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tensor:
    """A float64 array plus the bookkeeping reverse mode needs."""

    __slots__ = ("data", "requires_grad", "grad", "_prev", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _asarray(data)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None
        self._prev: tuple[Tensor, ...] = ()
        self._vjp = None  # g_out -> tuple of per-input grads (None = no flow)

    # -- construction helpers -------------------------------------------

    @staticmethod
    def _from_op(data: Array, prev: tuple["Tensor", ...], vjp) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in prev):
            out.requires_grad = True
            out._prev = prev
            out._vjp = vjp
        return out

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- introspection ---------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # -- backward --------------------------------------------------------

    def backward(self) -> None:
        if self.data.size != 1:
            raise NotScalar(f"backward needs a scalar, got shape {self.data.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in seen:
                    stack.append((p, False))

        flows: dict[int, Array] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = flows.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g.copy() if node.grad is None else node.grad + g
            if node._vjp is None:
                continue
            for p, gp in zip(node._prev, node._vjp(g)):
                if gp is None or not p.requires_grad:
                    continue
                acc = flows.get(id(p))
                flows[id(p)] = gp if acc is None else acc + gp

    def zero_grad(self) -> None:
        self.grad = None

    # -- binary elementwise ops -----------------------------------------

    @staticmethod
    def _binary(a: "Tensor", b, fwd, vjp_a, vjp_b) -> "Tensor":
        b = b if isinstance(b, Tensor) else Tensor(b)
        try:
            np.broadcast_shapes(a.shape, b.shape)
        except ValueError:
            raise ShapeMismatch(f"cannot combine shapes {a.shape} and {b.shape}") from None
        with np.errstate(all="ignore"):  # non-finite results raise below
            data = fwd(a.data, b.data)

        def vjp(g: Array):
            return (
                _unbroadcast(vjp_a(g, a.data, b.data), a.shape),
                _unbroadcast(vjp_b(g, a.data, b.data), b.shape),
            )

        return Tensor._from_op(_asarray(data), (a, b), vjp)

    def __add__(self, other):
        return Tensor._binary(self, other, lambda a, b: a + b,
                              lambda g, a, b: g, lambda g, a, b: g)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        return Tensor._binary(self, other, lambda a, b: a - b,
                              lambda g, a, b: g, lambda g, a, b: -g)

    def __rsub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        return other.__sub__(self)

    def __mul__(self, other):
        return Tensor._binary(self, other, lambda a, b: a * b,
                              lambda g, a, b: g * b, lambda g, a, b: g * a)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        return Tensor._binary(self, other, lambda a, b: a / b,
                              lambda g, a, b: g / b,
                              lambda g, a, b: -g * a / (b * b))

    def __rtruediv__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        return other.__truediv__(self)

    def __neg__(self):
        return Tensor._from_op(-self.data, (self,), lambda g: (-g,))

    # -- unary elementwise ops ------------------------------------------

    def pow(self, c: float) -> "Tensor":
        """Elementwise power with a constant exponent."""
        c = float(c)
        if c != int(c) and (self.data < 0).any():
            raise DomainError("fractional power of negative value")
        with np.errstate(all="ignore"):
            data = _asarray(self.data ** c)
        if c == 0.0:
            vjp = lambda g: (np.zeros_like(self.data),)
        elif c == 1.0:
            vjp = lambda g: (g,)
        else:
            vjp = lambda g: (g * c * self.data ** (c - 1.0),)
        return Tensor._from_op(data, (self,), vjp)

    def __pow__(self, c):
        return self.pow(c)

    def sqrt(self) -> "Tensor":
        if (self.data < 0).any():
            raise DomainError("sqrt of negative value")
        out_data = np.sqrt(self.data)
        safe = np.where(out_data == 0.0, 1.0, out_data)
        return Tensor._from_op(out_data, (self,), lambda g: (g / (2.0 * safe),))

    def exp(self) -> "Tensor":
        with np.errstate(all="ignore"):
            data = _asarray(np.exp(self.data))
        return Tensor._from_op(data, (self,), lambda g: (g * data,))

    def log(self) -> "Tensor":
        if (self.data <= 0).any():
            raise DomainError("log of non-positive value")
        return Tensor._from_op(np.log(self.data), (self,),
                               lambda g: (g / self.data,))

    def sigmoid(self) -> "Tensor":
        x = self.data
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        # keep the open interval promise so downstream logs stay finite
        np.clip(out, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0), out=out)
        return Tensor._from_op(out, (self,), lambda g: (g * out * (1.0 - out),))

    def relu(self) -> "Tensor":
        mask = self.data > 0
        # np.where (not g*mask) so an inf upstream still yields exactly 0
        # on the clamped side
        return Tensor._from_op(np.where(mask, self.data, 0.0), (self,),
                               lambda g: (np.where(mask, g, 0.0),))

    # -- shape ops --------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        if int(np.prod(shape, dtype=np.int64)) != self.size:
            raise ShapeMismatch(f"cannot reshape {self.shape} to {shape}")
        return Tensor._from_op(self.data.reshape(shape), (self,),
                               lambda g: (g.reshape(self.shape),))

    def transpose(self) -> "Tensor":
        if self.ndim != 2:
            raise ShapeMismatch(f"transpose needs a matrix, got shape {self.shape}")
        return Tensor._from_op(self.data.T.copy(), (self,), lambda g: (g.T,))

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def __getitem__(self, key) -> "Tensor":
        try:
            data = self.data[key]
        except IndexError:
            raise IndexOutOfRange(f"index {key!r} out of range for shape {self.shape}") from None
        if np.isscalar(data) or data.ndim == 0:
            data = np.asarray(data)

        def vjp(g: Array):
            full = np.zeros_like(self.data)
            full[key] += g
            return (full,)

        return Tensor._from_op(data.copy(), (self,), vjp)

    def index_rows(self, indices) -> "Tensor":
        """Gather rows; the index list is not differentiated."""
        idx = np.asarray(indices, dtype=np.int64)
        if idx.ndim != 1:
            raise ShapeMismatch("index_rows needs a flat index list")
        if idx.size and (idx.min() < 0 or idx.max() >= self.shape[0]):
            raise IndexOutOfRange(f"row index out of range for shape {self.shape}")

        def vjp(g: Array):
            full = np.zeros_like(self.data)
            np.add.at(full, idx, g)
            return (full,)

        return Tensor._from_op(self.data[idx].copy(), (self,), vjp)

    # -- reductions -------------------------------------------------------

    def _check_axis(self, axis):
        if axis is None:
            return None
        axis = int(axis)
        if not -self.ndim <= axis < self.ndim:
            raise AxisOutOfRange(f"axis {axis} out of range for shape {self.shape}")
        return axis % self.ndim if self.ndim else 0

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        axis = self._check_axis(axis)
        data = self.data.sum(axis=axis, keepdims=keepdims)

        def vjp(g: Array):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.shape).copy(),)

        return Tensor._from_op(np.asarray(data), (self,), vjp)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        axis = self._check_axis(axis)
        n = self.size if axis is None else self.shape[axis]
        data = self.data.mean(axis=axis, keepdims=keepdims)

        def vjp(g: Array):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.shape).copy() / n,)

        return Tensor._from_op(np.asarray(data), (self,), vjp)


class Parameter(Tensor):
    """A named leaf tensor; models keep these in insertion-ordered dicts."""

    __slots__ = ("name",)

    def __init__(self, name: str, data):
        super().__init__(data, requires_grad=True)
        self.name = name


# ---------------------------------------------------------------------------
# spec-level operations as free functions


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatch(f"matmul needs matrices, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"inner dimensions differ: {a.shape} x {b.shape}")

    def vjp(g: Array):
        return (g @ b.data.T, a.data.T @ g)

    return Tensor._from_op(a.data @ b.data, (a, b), vjp)


def activation(x: Tensor, kind: str) -> Tensor:
    if kind == "sigmoid":
        return x.sigmoid()
    if kind == "relu":
        return x.relu()
    raise ValueError(f"unknown activation kind {kind!r}")


def softmax(x: Tensor, axis: int) -> Tensor:
    axis = x._check_axis(axis)
    if axis is None:
        raise AxisOutOfRange("softmax needs an explicit axis")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def vjp(g: Array):
        inner = (g * s).sum(axis=axis, keepdims=True)
        return (s * (g - inner),)

    return Tensor._from_op(s, (x,), vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeMismatch(
            f"gain/bias must have shape ({d},), got {gain.shape} and {bias.shape}")
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    normed = centered / (var + eps).sqrt()
    return normed * gain + bias


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    if b.shape != (w.shape[1],):
        raise ShapeMismatch(f"bias shape {b.shape} does not match weight {w.shape}")
    return matmul(x, w) + b


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeMismatch("concat of nothing")
    nd = tensors[0].ndim
    if not -nd <= axis < nd:
        raise AxisOutOfRange(f"axis {axis} out of range for concat")
    axis = axis % nd
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeMismatch("concat operands disagree off-axis") from None
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g: Array):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return Tensor._from_op(data, tuple(tensors), vjp)


def backward(loss: Tensor) -> None:
    loss.backward()
