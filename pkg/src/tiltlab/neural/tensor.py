"""Reverse-mode automatic differentiation over dense numpy arrays.

Supports exactly the primitives the encoders need: matmul, broadcast
add/mul, elementwise nonlinearities, softmax, layer normalization,
embedding gather, concatenation, dropout, and masked cross-entropy.
Graphs are built eagerly by the ops and consumed by ``backward``.

Float32 is the training dtype; gradient checks run the same code at
float64 by constructing float64 parameters.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np

from ..errors import ConfigError


class Tensor:
    """A dense array plus an optional gradient and graph linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    def zero_grad(self):
        self.grad = None

    def accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def detach(self) -> "Tensor":
        return Tensor(self.data)


class Parameter(Tensor):
    """A trainable leaf tensor."""

    __slots__ = ()

    def __init__(self, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum-reduce a gradient back to the shape it was broadcast from."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _as_tensor(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------

def add(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    out_data = a.data + b.data

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.data.shape))

    out = _node(out_data, (a, b), backward)
    return out


def mul(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    out_data = a.data * b.data

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    out = _node(out_data, (a, b), backward)
    return out


def neg(a: Tensor) -> Tensor:
    def backward():
        if a.requires_grad:
            a.accumulate(-out.grad)

    out = _node(-a.data, (a,), backward)
    return out


def sub(a: Tensor, b) -> Tensor:
    return add(a, neg(_as_tensor(b, a)))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = np.matmul(a.data, b.data)

    def backward():
        g = out.grad
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a.accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b.accumulate(_unbroadcast(gb, b.data.shape))

    out = _node(out_data, (a, b), backward)
    return out


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    """Row gather; gradients scatter-add back into the table."""
    ids = np.asarray(ids)
    out_data = weight.data[ids]

    def backward():
        if weight.requires_grad:
            if weight.grad is None:
                weight.grad = np.zeros_like(weight.data)
            np.add.at(weight.grad, ids.reshape(-1),
                      out.grad.reshape(-1, weight.data.shape[1]))

    out = _node(out_data, (weight,), backward)
    return out


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def backward():
        if a.requires_grad:
            a.accumulate(out.grad * (1.0 - out_data * out_data))

    out = _node(out_data, (a,), backward)
    return out


def sigmoid(a: Tensor) -> Tensor:
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def backward():
        if a.requires_grad:
            a.accumulate(out.grad * out_data * (1.0 - out_data))

    out = _node(out_data, (a,), backward)
    return out


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0)

    def backward():
        if a.requires_grad:
            a.accumulate(out.grad * (a.data > 0))

    out = _node(out_data, (a,), backward)
    return out


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward():
        if a.requires_grad:
            g = out.grad
            dot = (g * out_data).sum(axis=axis, keepdims=True)
            a.accumulate((g - dot) * out_data)

    out = _node(out_data, (a,), backward)
    return out


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then affine."""
    mean = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    norm = centered * inv
    out_data = norm * gain.data + bias.data

    def backward():
        g = out.grad
        if gain.requires_grad:
            gain.accumulate(_unbroadcast(g * norm, gain.data.shape))
        if bias.requires_grad:
            bias.accumulate(_unbroadcast(g, bias.data.shape))
        if a.requires_grad:
            gn = g * gain.data
            term2 = gn.mean(axis=-1, keepdims=True)
            term3 = norm * (gn * norm).mean(axis=-1, keepdims=True)
            a.accumulate((gn - term2 - term3) * inv)

    out = _node(out_data, (a, gain, bias), backward)
    return out


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward():
        g = out.grad
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(start, stop)
                t.accumulate(g[tuple(idx)])

    out = _node(out_data, tuple(tensors), backward)
    return out


def stack(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    out_data = np.stack([t.data for t in tensors], axis=axis)

    def backward():
        g = out.grad
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t.accumulate(np.take(g, i, axis=axis))

    out = _node(out_data, tuple(tensors), backward)
    return out


def dropout(a: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; call only on the training path."""
    if p <= 0.0:
        return a
    keep = (rng.random(a.data.shape) >= p).astype(a.data.dtype) / (1.0 - p)
    out_data = a.data * keep

    def backward():
        if a.requires_grad:
            a.accumulate(out.grad * keep)

    out = _node(out_data, (a,), backward)
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out_data = a.data.reshape(shape)

    def backward():
        if a.requires_grad:
            a.accumulate(out.grad.reshape(a.data.shape))

    out = _node(out_data, (a,), backward)
    return out


def swapaxes(a: Tensor, axis1: int, axis2: int) -> Tensor:
    out_data = np.swapaxes(a.data, axis1, axis2)

    def backward():
        if a.requires_grad:
            a.accumulate(np.swapaxes(out.grad, axis1, axis2))

    out = _node(out_data, (a,), backward)
    return out


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis."""
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out_data = a.data[idx]

    def backward():
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[idx] += out.grad

    out = _node(out_data, (a,), backward)
    return out


def gather_positions(a: Tensor, positions: np.ndarray) -> Tensor:
    """Pick one time step per batch row: (B, T, D) -> (B, D)."""
    positions = np.asarray(positions)
    batch = np.arange(a.data.shape[0])
    out_data = a.data[batch, positions]

    def backward():
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            np.add.at(a.grad, (batch, positions), out.grad)

    out = _node(out_data, (a,), backward)
    return out


def put_positions(values: Tensor, batch_idx: np.ndarray, pos_idx: np.ndarray,
                  batch: int, width: int) -> Tensor:
    """Scatter rows (N, D) into a zero grid (batch, width, D); inverse of a
    double gather. Index pairs must be unique."""
    batch_idx = np.asarray(batch_idx)
    pos_idx = np.asarray(pos_idx)
    out_data = np.zeros((batch, width, values.data.shape[-1]),
                        dtype=values.data.dtype)
    out_data[batch_idx, pos_idx] = values.data

    def backward():
        if values.requires_grad:
            values.accumulate(out.grad[batch_idx, pos_idx])

    out = _node(out_data, (values,), backward)
    return out


def mean(a: Tensor) -> Tensor:
    out_data = np.asarray(a.data.mean(), dtype=a.data.dtype)

    def backward():
        if a.requires_grad:
            a.accumulate(np.full_like(a.data, out.grad / a.data.size))

    out = _node(out_data, (a,), backward)
    return out


def cross_entropy(logits: Tensor, targets: np.ndarray,
                  mask: np.ndarray | None = None) -> Tensor:
    """Mean negative log-likelihood over masked positions.

    ``logits`` is (N, V); ``targets`` int (N,); ``mask`` selects the
    positions that contribute (all, if omitted).
    """
    if logits.data.ndim != 2:
        raise ConfigError("cross_entropy expects flattened (N, V) logits")
    targets = np.asarray(targets)
    n = logits.data.shape[0]
    if mask is None:
        mask = np.ones(n, dtype=logits.data.dtype)
    else:
        mask = np.asarray(mask, dtype=logits.data.dtype)
    count = mask.sum()
    if count == 0:
        raise ConfigError("cross_entropy mask selects no positions")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    lse = np.log(exp.sum(axis=1)) + logits.data.max(axis=1)
    rows = np.arange(n)
    nll = lse - logits.data[rows, targets]
    out_data = np.asarray((nll * mask).sum() / count, dtype=logits.data.dtype)

    def backward():
        if logits.requires_grad:
            probs = exp / exp.sum(axis=1, keepdims=True)
            probs[rows, targets] -= 1.0
            probs *= (mask / count)[:, None]
            logits.accumulate(out.grad * probs)

    out = _node(out_data, (logits,), backward)
    return out


# ---------------------------------------------------------------------------
# Backward driver
# ---------------------------------------------------------------------------

def backward(loss: Tensor, params: Sequence[Tensor] | None = None) -> None:
    """Backpropagate from a scalar loss; the graph is consumed.

    When ``params`` is given, every listed tensor ends up with a gradient
    buffer (zeros if the loss does not depend on it, with a warning).
    """
    if loss.data.size != 1:
        raise ConfigError(
            f"backward expects a scalar loss, got shape {loss.data.shape}"
        )
    # Iterative topological order; LSTM graphs overflow Python recursion.
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward()
        node._backward = None
        node._parents = ()

    if params is not None:
        for p in params:
            if p.grad is None:
                warnings.warn("parameter detached from the loss; gradient is zero",
                              stacklevel=2)
                p.grad = np.zeros_like(p.data)
