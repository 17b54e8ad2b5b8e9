"""Parameter initialization and first-order optimizers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch
from .autograd import Tensor

CLIP_GLOBAL_NORM = 5.0


def init_uniform(shape, rng, scale: float = 0.1, dtype=np.float32) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape).astype(dtype)


def init_normal(shape, rng, std: float = 0.1, dtype=np.float32) -> np.ndarray:
    return (rng.standard_normal(size=shape) * std).astype(dtype)


def init_params(shapes: dict[str, tuple], family: str, rng,
                dtype=np.float32) -> dict[str, Tensor]:
    """Family initializers: "uniform" draws from [-0.1, 0.1] (recurrent
    models), "normal" from N(0, 0.1) (convolutional models). Deterministic
    under the provided generator."""
    if family == "uniform":
        draw = lambda shape: init_uniform(shape, rng, dtype=dtype)
    elif family == "normal":
        draw = lambda shape: init_normal(shape, rng, dtype=dtype)
    else:
        raise ValueError(f"unknown init family {family!r}")
    return {name: Tensor(draw(shape), requires_grad=True)
            for name, shape in shapes.items()}


@dataclass
class OptimizerState:
    kind: str  # "sgd_momentum" | "adam"
    lr: float
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    slots: dict = field(default_factory=dict)

    def _slot(self, name: str, like: np.ndarray, which: str) -> np.ndarray:
        key = (name, which)
        if key not in self.slots:
            self.slots[key] = np.zeros_like(like)
        return self.slots[key]


def clip_global_norm(grads: dict[str, np.ndarray],
                     max_norm: float = CLIP_GLOBAL_NORM) -> dict[str, np.ndarray]:
    total = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum())
                              for g in grads.values())))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


def optimizer_update(state: OptimizerState, params: dict[str, Tensor],
                     grads: dict[str, np.ndarray]) -> None:
    """Apply one SGD-momentum or Adam update in place."""
    for name, grad in grads.items():
        if params[name].data.shape != grad.shape:
            raise ShapeMismatch(f"{name}: param {params[name].data.shape} vs grad {grad.shape}")

    if state.kind == "sgd_momentum":
        for name, grad in grads.items():
            data = params[name].data
            vel = state._slot(name, data, "vel")
            vel *= state.momentum
            vel += grad
            data -= (state.lr * vel).astype(data.dtype)
    elif state.kind == "adam":
        state.step += 1
        bc1 = 1.0 - state.beta1 ** state.step
        bc2 = 1.0 - state.beta2 ** state.step
        for name, grad in grads.items():
            data = params[name].data
            m = state._slot(name, data, "m")
            v = state._slot(name, data, "v")
            m *= state.beta1
            m += (1.0 - state.beta1) * grad
            v *= state.beta2
            v += (1.0 - state.beta2) * grad * grad
            m_hat = m / bc1
            v_hat = v / bc2
            data -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(data.dtype)
    else:
        raise ValueError(f"unknown optimizer kind {state.kind!r}")
