"""Recurrent, convolutional and regularization layers on the autograd core."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BadProb, ShapeMismatch
from . import autograd as ag
from .autograd import Tensor


@dataclass
class RnnCellParams:
    w_hx: Tensor                # (k_in, H)
    w_hh: Tensor                # (H, H)
    w_yh: Tensor | None = None  # (H, out), optional output head


def rnn_step(x_t: Tensor, h_prev: Tensor, params: RnnCellParams):
    """Plain recurrent step: h_t = sigmoid(x W_hx + h_prev W_hh), y_t = h_t W_yh."""
    if x_t.shape[-1] != params.w_hx.shape[0] or h_prev.shape[-1] != params.w_hh.shape[0]:
        raise ShapeMismatch(f"rnn_step x {x_t.shape}, h {h_prev.shape}")
    h_t = ag.sigmoid(ag.add(ag.matmul(x_t, params.w_hx),
                            ag.matmul(h_prev, params.w_hh)))
    y_t = ag.matmul(h_t, params.w_yh) if params.w_yh is not None else None
    return h_t, y_t


@dataclass
class LstmCellParams:
    # per-gate weights over the concatenated [x_t, h_prev], each (k_in+H, H)
    w_i: Tensor
    w_f: Tensor
    w_o: Tensor
    w_g: Tensor
    b_i: Tensor
    b_f: Tensor
    b_o: Tensor
    b_g: Tensor

    @property
    def hidden(self) -> int:
        return self.w_i.shape[1]

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.{k}": getattr(self, k)
                for k in ("w_i", "w_f", "w_o", "w_g", "b_i", "b_f", "b_o", "b_g")}


def lstm_step(x_t: Tensor, h_prev: Tensor, c_prev: Tensor, params: LstmCellParams):
    """Standard gated step: c_t = f*c_prev + i*g, h_t = o*tanh(c_t)."""
    if x_t.shape[0] != h_prev.shape[0] or h_prev.shape != c_prev.shape:
        raise ShapeMismatch(f"lstm_step x {x_t.shape}, h {h_prev.shape}, c {c_prev.shape}")
    if x_t.shape[1] + h_prev.shape[1] != params.w_i.shape[0]:
        raise ShapeMismatch(
            f"lstm_step input {x_t.shape[1]}+{h_prev.shape[1]} vs weights {params.w_i.shape}")
    z = ag.concat([x_t, h_prev], axis=1)
    i = ag.sigmoid(ag.add(ag.matmul(z, params.w_i), params.b_i))
    f = ag.sigmoid(ag.add(ag.matmul(z, params.w_f), params.b_f))
    o = ag.sigmoid(ag.add(ag.matmul(z, params.w_o), params.b_o))
    g = ag.tanh(ag.add(ag.matmul(z, params.w_g), params.b_g))
    c_t = ag.add(ag.mul(f, c_prev), ag.mul(i, g))
    h_t = ag.mul(o, ag.tanh(c_t))
    return h_t, c_t


class LstmStack:
    """Stacked LSTM layers sharing one step interface."""

    def __init__(self, cells: list[LstmCellParams]):
        self.cells = cells

    @property
    def hidden(self) -> int:
        return self.cells[-1].hidden

    def initial_state(self, batch: int, dtype=np.float32):
        return [(Tensor(np.zeros((batch, c.hidden), dtype=dtype)),
                 Tensor(np.zeros((batch, c.hidden), dtype=dtype)))
                for c in self.cells]

    def step(self, x_t: Tensor, states):
        new_states = []
        inp = x_t
        for cell, (h, c) in zip(self.cells, states):
            h, c = lstm_step(inp, h, c, cell)
            new_states.append((h, c))
            inp = h
        return inp, new_states

    def named(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        for i, cell in enumerate(self.cells):
            out.update(cell.named(f"{prefix}.l{i}"))
        return out


@dataclass
class Conv1dParams:
    w: Tensor  # (width * k_in, filters)
    b: Tensor  # (filters,)
    width: int


def conv1d_maxpool(seq: Tensor, params: Conv1dParams, pool: int = 4) -> Tensor:
    """Valid 1-D convolution + bias + ReLU over (B, T, k), then non-overlapping
    max pooling of size pool along time. Input is zero-padded so at least one
    pooled frame exists and the conv output length is a pool multiple."""
    b, t, k = seq.shape
    width = params.width
    if width * k != params.w.shape[0]:
        raise ShapeMismatch(f"conv weights {params.w.shape} for width {width}, k {k}")
    conv_len = max(1, t - width + 1)
    conv_len = ((conv_len + pool - 1) // pool) * pool
    needed = conv_len + width - 1
    if needed > t:
        seq = ag.pad_time(seq, needed)
    steps = []
    for pos in range(conv_len):
        window = ag.reshape(ag.narrow(seq, 1, pos, width), (b, width * k))
        steps.append(ag.relu(ag.add(ag.matmul(window, params.w), params.b)))
    return ag.max_pool_time(ag.stack_time(steps), pool)


def dropout(t: Tensor, keep_prob: float, rng, training: bool) -> Tensor:
    """Inverted dropout: zero with prob 1-keep_prob and rescale kept units;
    identity at inference."""
    if not 0.0 < keep_prob <= 1.0:
        raise BadProb(f"keep_prob {keep_prob}")
    if not training or keep_prob == 1.0:
        return t
    mask = (rng.random(t.shape) < keep_prob).astype(t.data.dtype) / keep_prob
    return ag.mul(t, mask)


def softmax_xent(logits, target: int):
    """Loss and input gradient of softmax cross entropy for one logit vector."""
    logits = np.asarray(logits, dtype=np.float64)
    node = Tensor(logits[None, :], requires_grad=True)
    loss = ag.cross_entropy(node, np.array([target]))
    loss.backward()
    return float(loss.data), node.grad[0]
