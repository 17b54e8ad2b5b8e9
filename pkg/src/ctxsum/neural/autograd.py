"""Minimal reverse-mode autodiff on numpy arrays.

Only the handful of ops the sequence models need. Every op records its
parents and a closure producing parent gradients; Tensor.backward() walks
the graph in reverse topological order. Training runs in float32; gradient
checks build float64 graphs with the same code path.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward_fn = backward_fn

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.size != 1:
            raise ShapeMismatch("backward() starts from a scalar loss")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward_fn is None or node.grad is None:
                continue
            grads = node._backward_fn(node.grad)
            for parent, grad in zip(node._parents, grads):
                if grad is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = grad
                else:
                    parent.grad = parent.grad + grad


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited and parent.requires_grad:
                stack.append((parent, False))
    return order


def parameter(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=True)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


# --- ops --------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; b may be a 1-D bias broadcast over leading axes."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape and not (b.data.ndim == 1 and a.shape[-1] == b.shape[0]):
        raise ShapeMismatch(f"add {a.shape} vs {b.shape}")
    out_data = a.data + b.data

    def backward_fn(grad):
        grad_b = grad
        if b.data.shape != grad.shape:
            grad_b = grad.reshape(-1, b.data.shape[0]).sum(axis=0)
        return (grad, grad_b)

    return Tensor(out_data, parents=(a, b), backward_fn=backward_fn)


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product; b may be a Tensor of equal shape, a python
    scalar, or a constant ndarray of equal shape (e.g. a dropout mask)."""
    a = _as_tensor(a)
    if isinstance(b, (int, float)):
        out_data = a.data * b

        def backward_scalar(grad):
            return (grad * b,)

        return Tensor(out_data, parents=(a,), backward_fn=backward_scalar)

    b = _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"mul {a.shape} vs {b.shape}")
    out_data = a.data * b.data

    def backward_fn(grad):
        return (grad * b.data, grad * a.data)

    return Tensor(out_data, parents=(a, b), backward_fn=backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def backward_fn(grad):
        return (grad @ b.data.T, a.data.T @ grad)

    return Tensor(out_data, parents=(a, b), backward_fn=backward_fn)


def sigmoid(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    d = x.data
    out_data = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                        np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    out_data = out_data.astype(d.dtype)

    def backward_fn(grad):
        return (grad * out_data * (1.0 - out_data),)

    return Tensor(out_data, parents=(x,), backward_fn=backward_fn)


def tanh(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out_data = np.tanh(x.data)

    def backward_fn(grad):
        return (grad * (1.0 - out_data * out_data),)

    return Tensor(out_data, parents=(x,), backward_fn=backward_fn)


def relu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out_data = np.maximum(x.data, 0)

    def backward_fn(grad):
        return (grad * (x.data > 0).astype(grad.dtype),)

    return Tensor(out_data, parents=(x,), backward_fn=backward_fn)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward_fn(grad):
        return tuple(np.split(grad, splits, axis=axis))

    return Tensor(out_data, parents=tuple(tensors), backward_fn=backward_fn)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    x = _as_tensor(x)
    index = [slice(None)] * x.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    out_data = x.data[index]

    def backward_fn(grad):
        full = np.zeros_like(x.data)
        full[index] = grad
        return (full,)

    return Tensor(out_data, parents=(x,), backward_fn=backward_fn)


def reshape(x: Tensor, shape) -> Tensor:
    x = _as_tensor(x)
    out_data = x.data.reshape(shape)

    def backward_fn(grad):
        return (grad.reshape(x.data.shape),)

    return Tensor(out_data, parents=(x,), backward_fn=backward_fn)


def rows(table: Tensor, ids) -> Tensor:
    """Row gather (embedding lookup); gradients scatter-add into the table."""
    table = _as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    out_data = table.data[ids]

    def backward_fn(grad):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, grad)
        return (full,)

    return Tensor(out_data, parents=(table,), backward_fn=backward_fn)


def sum_all(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out_data = np.asarray(x.data.sum(), dtype=x.data.dtype)

    def backward_fn(grad):
        return (np.broadcast_to(grad, x.data.shape).astype(x.data.dtype),)

    return Tensor(out_data, parents=(x,), backward_fn=backward_fn)


def stack_time(tensors) -> Tensor:
    """Stack (B, F) steps into (B, T, F)."""
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.stack([t.data for t in tensors], axis=1)

    def backward_fn(grad):
        return tuple(grad[:, t, :] for t in range(len(tensors)))

    return Tensor(out_data, parents=tuple(tensors), backward_fn=backward_fn)


def pad_time(x: Tensor, total: int) -> Tensor:
    """Zero-pad (B, T, F) along the time axis up to length total."""
    x = _as_tensor(x)
    b, t, f = x.data.shape
    if total < t:
        raise ShapeMismatch(f"pad_time target {total} < current {t}")
    if total == t:
        return x
    pad = np.zeros((b, total - t, f), dtype=x.data.dtype)
    out_data = np.concatenate([x.data, pad], axis=1)

    def backward_fn(grad):
        return (grad[:, :t, :],)

    return Tensor(out_data, parents=(x,), backward_fn=backward_fn)


def max_pool_time(x: Tensor, pool: int) -> Tensor:
    """Non-overlapping max pool along the time axis of (B, T, F); T must be
    a multiple of pool."""
    x = _as_tensor(x)
    b, t, f = x.data.shape
    if t % pool != 0:
        raise ShapeMismatch(f"time length {t} not a multiple of pool {pool}")
    windows = x.data.reshape(b, t // pool, pool, f)
    argmax = windows.argmax(axis=2)  # (B, T', F)
    out_data = np.take_along_axis(windows, argmax[:, :, None, :], axis=2)[:, :, 0, :]

    def backward_fn(grad):
        full = np.zeros_like(windows)
        np.put_along_axis(full, argmax[:, :, None, :], grad[:, :, None, :], axis=2)
        return (full.reshape(b, t, f),)

    return Tensor(out_data, parents=(x,), backward_fn=backward_fn)


def cross_entropy(logits: Tensor, targets, mask=None) -> Tensor:
    """Summed softmax cross entropy over a batch. targets are int ids,
    mask (optional) zeroes padded positions out of the loss."""
    logits = _as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    n, c = logits.data.shape
    if targets.shape != (n,):
        raise ShapeMismatch(f"targets {targets.shape} for logits {logits.shape}")
    if mask is None:
        mask = np.ones(n, dtype=logits.data.dtype)
    else:
        mask = np.asarray(mask, dtype=logits.data.dtype)

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_z[:, None]
    nll = -log_probs[np.arange(n), targets]
    # per-example values are batch-invariant; a float64 sum keeps reported
    # losses independent of how examples were grouped into batches
    out_data = np.asarray((nll.astype(np.float64) * mask.astype(np.float64)).sum())

    def backward_fn(grad):
        probs = np.exp(log_probs)
        probs[np.arange(n), targets] -= 1.0
        grad = np.asarray(grad, dtype=logits.data.dtype)
        return (grad * probs * mask[:, None],)

    return Tensor(out_data, parents=(logits,), backward_fn=backward_fn)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Inference-side log softmax on raw arrays (last axis)."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
