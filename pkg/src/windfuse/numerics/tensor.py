"""Dense float64 tensors with reverse-mode automatic differentiation.

The engine is deliberately small: it records exactly the operators the
forecasting networks are built from (affine maps, the usual activations,
valid 1-d convolution, pairwise max pooling, concatenation/stacking and
mean reductions). Graphs are recorded eagerly through closures on the
output node; ``backward`` walks the graph once in reverse topological
order. Leaf gradients accumulate across calls, so the training loop is
responsible for zeroing them between batches.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError, GraphStateError

__all__ = [
    "Tensor",
    "backward",
    "concat",
    "stack_last",
    "conv1d",
    "max_pool1d",
    "zero_grads",
]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A numpy float64 array plus an optional gradient buffer.

    ``requires_grad`` marks parameters and any input whose gradient the
    caller wants; outputs of operations inherit it from their parents.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @staticmethod
    def zeros(shape, requires_grad: bool = False) -> "Tensor":
        return Tensor(np.zeros(shape, dtype=np.float64), requires_grad=requires_grad)

    def ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    # -- graph plumbing ------------------------------------------------------

    @staticmethod
    def _from_op(data: np.ndarray, parents: Sequence["Tensor"], backward_fn) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward_fn
        return out

    # -- elementwise arithmetic ----------------------------------------------

    def _binary_shapes(self, other: "Tensor", op: str) -> None:
        try:
            np.broadcast_shapes(self.shape, other.shape)
        except ValueError:
            raise DimensionError(
                f"{op}: shapes {self.shape} and {other.shape} do not broadcast"
            ) from None

    def add(self, other: "Tensor") -> "Tensor":
        self._binary_shapes(other, "add")
        out_data = self.data + other.data

        def _bw():
            if self.requires_grad:
                self.grad += _unbroadcast(out.grad, self.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(out.grad, other.shape)

        out = Tensor._from_op(out_data, (self, other), _bw)
        return out

    def sub(self, other: "Tensor") -> "Tensor":
        self._binary_shapes(other, "sub")
        out_data = self.data - other.data

        def _bw():
            if self.requires_grad:
                self.grad += _unbroadcast(out.grad, self.shape)
            if other.requires_grad:
                other.grad -= _unbroadcast(out.grad, other.shape)

        out = Tensor._from_op(out_data, (self, other), _bw)
        return out

    def mul(self, other: "Tensor") -> "Tensor":
        self._binary_shapes(other, "mul")
        out_data = self.data * other.data

        def _bw():
            if self.requires_grad:
                self.grad += _unbroadcast(out.grad * other.data, self.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(out.grad * self.data, other.shape)

        out = Tensor._from_op(out_data, (self, other), _bw)
        return out

    def neg(self) -> "Tensor":
        def _bw():
            if self.requires_grad:
                self.grad -= out.grad

        out = Tensor._from_op(-self.data, (self,), _bw)
        return out

    __add__ = add
    __sub__ = sub
    __mul__ = mul
    __neg__ = neg

    # -- linear algebra ------------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        if self.ndim != 2 or other.ndim != 2:
            raise DimensionError(
                f"matmul expects 2-d operands, got {self.shape} and {other.shape}"
            )
        if self.shape[1] != other.shape[0]:
            raise DimensionError(
                f"matmul: inner dimensions differ, {self.shape} vs {other.shape}"
            )
        out_data = self.data @ other.data

        def _bw():
            if self.requires_grad:
                self.grad += out.grad @ other.data.T
            if other.requires_grad:
                other.grad += self.data.T @ out.grad

        out = Tensor._from_op(out_data, (self, other), _bw)
        return out

    __matmul__ = matmul

    # -- activations -----------------------------------------------------

    def relu(self) -> "Tensor":
        out_data = np.maximum(self.data, 0.0)

        def _bw():
            if self.requires_grad:
                self.grad += out.grad * (self.data > 0.0)

        out = Tensor._from_op(out_data, (self,), _bw)
        return out

    def sigmoid(self) -> "Tensor":
        out_data = 1.0 / (1.0 + np.exp(-self.data))

        def _bw():
            if self.requires_grad:
                self.grad += out.grad * out_data * (1.0 - out_data)

        out = Tensor._from_op(out_data, (self,), _bw)
        return out

    def tanh(self) -> "Tensor":
        out_data = np.tanh(self.data)

        def _bw():
            if self.requires_grad:
                self.grad += out.grad * (1.0 - out_data * out_data)

        out = Tensor._from_op(out_data, (self,), _bw)
        return out

    # -- shape ops ---------------------------------------------------------

    def reshape(self, *shape: int) -> "Tensor":
        out_data = self.data.reshape(shape)

        def _bw():
            if self.requires_grad:
                self.grad += out.grad.reshape(self.shape)

        out = Tensor._from_op(out_data, (self,), _bw)
        return out

    def timestep(self, index: int) -> "Tensor":
        """Select step `index` along axis 1 of a [batch, steps, features] tensor."""
        if self.ndim != 3:
            raise DimensionError(f"timestep expects a 3-d tensor, got {self.shape}")
        out_data = np.ascontiguousarray(self.data[:, index, :])

        def _bw():
            if self.requires_grad:
                self.grad[:, index, :] += out.grad

        out = Tensor._from_op(out_data, (self,), _bw)
        return out

    # -- reductions ----------------------------------------------------------

    def mean(self) -> "Tensor":
        out_data = np.asarray(self.data.mean())
        n = self.size

        def _bw():
            if self.requires_grad:
                self.grad += np.full(self.shape, float(out.grad) / n)

        out = Tensor._from_op(out_data, (self,), _bw)
        return out

    def sum(self) -> "Tensor":
        out_data = np.asarray(self.data.sum())

        def _bw():
            if self.requires_grad:
                self.grad += np.full(self.shape, float(out.grad))

        out = Tensor._from_op(out_data, (self,), _bw)
        return out


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate tensors along `axis`."""
    if not tensors:
        raise ValueError("concat needs at least one tensor")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _bw():
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * out_data.ndim
                idx[axis] = slice(lo, hi)
                t.grad += out.grad[tuple(idx)]

    out = Tensor._from_op(out_data, tuple(tensors), _bw)
    return out


def stack_last(tensors: Sequence[Tensor]) -> Tensor:
    """Stack same-shape tensors as channels along a new trailing axis."""
    if not tensors:
        raise ValueError("stack_last needs at least one tensor")
    shape0 = tensors[0].shape
    for t in tensors:
        if t.shape != shape0:
            raise DimensionError(
                f"stack_last: ragged shapes {shape0} vs {t.shape}"
            )
    out_data = np.stack([t.data for t in tensors], axis=-1)

    def _bw():
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t.grad += out.grad[..., i]

    out = Tensor._from_op(out_data, tuple(tensors), _bw)
    return out


def conv1d(x: Tensor, filters: Tensor) -> Tensor:
    """Valid 1-d convolution, stride 1.

    x: [batch, length, channels]; filters: [kernel, channels, n_filters];
    output: [batch, length - kernel + 1, n_filters].
    """
    if x.ndim != 3 or filters.ndim != 3:
        raise DimensionError(
            f"conv1d expects 3-d input and filters, got {x.shape} and {filters.shape}"
        )
    batch, length, channels = x.shape
    kernel, f_channels, n_filters = filters.shape
    if channels != f_channels:
        raise DimensionError(
            f"conv1d: channel mismatch, input {x.shape} vs filters {filters.shape}"
        )
    if length < kernel:
        raise ValueError(
            f"conv1d: input length {length} shorter than kernel {kernel}"
        )
    windows = sliding_window_view(x.data, kernel, axis=1)  # [b, p, c, k]
    out_data = np.einsum("bpck,kcf->bpf", windows, filters.data, optimize=True)
    p_len = length - kernel + 1

    def _bw():
        g = out.grad
        if filters.requires_grad:
            filters.grad += np.einsum("bpck,bpf->kcf", windows, g, optimize=True)
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            for dk in range(kernel):
                gx[:, dk : dk + p_len, :] += np.einsum(
                    "bpf,cf->bpc", g, filters.data[dk], optimize=True
                )
            x.grad += gx

    out = Tensor._from_op(out_data, (x, filters), _bw)
    return out


def max_pool1d(x: Tensor, pool: int = 2) -> Tensor:
    """Non-overlapping max pooling along axis 1; a trailing remainder is dropped."""
    if x.ndim != 3:
        raise DimensionError(f"max_pool1d expects a 3-d tensor, got {x.shape}")
    batch, length, channels = x.shape
    if pool < 1:
        raise ValueError(f"pool size must be >= 1, got {pool}")
    if length < pool:
        raise ValueError(f"max_pool1d: length {length} shorter than pool {pool}")
    l_out = length // pool
    trimmed = x.data[:, : l_out * pool, :].reshape(batch, l_out, pool, channels)
    arg = trimmed.argmax(axis=2)
    out_data = np.take_along_axis(trimmed, arg[:, :, None, :], axis=2)[:, :, 0, :]

    def _bw():
        if x.requires_grad:
            flat = np.zeros((batch, l_out * pool, channels))
            np.put_along_axis(
                flat.reshape(batch, l_out, pool, channels),
                arg[:, :, None, :],
                out.grad[:, :, None, :],
                axis=2,
            )
            gx = np.zeros_like(x.data)
            gx[:, : l_out * pool, :] = flat
            x.grad += gx

    out = Tensor._from_op(out_data, (x,), _bw)
    return out


def backward(loss: Tensor) -> None:
    """Propagate gradients from a recorded scalar loss to all parameters.

    Interior node gradients are reset each call; leaf gradients accumulate,
    so calling twice without zeroing doubles parameter gradients.
    """
    if loss.size != 1:
        raise ValueError(f"backward expects a scalar loss, got shape {loss.shape}")
    if loss._backward is None:
        raise GraphStateError("backward called on a tensor with no recorded graph")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))

    for node in topo:
        if node._parents:
            node.grad = np.zeros_like(node.data)
        else:
            node.ensure_grad()
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward()


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = np.zeros_like(p.data)
