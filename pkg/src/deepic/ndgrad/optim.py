"""Adam with bias correction, plus global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import ShapeError, Tensor


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray | None], state: AdamState) -> AdamState:
    """Apply one Adam update to ``params`` and advance ``state``.

    Moments are created lazily as zeros on the first call. A ``None`` gradient
    is treated as zero. Parameter arrays are replaced, not written in place,
    so references held elsewhere keep the old values.
    """
    if len(params) != len(grads):
        raise ShapeError("adam_step", "len(grads)", len(params), len(grads))
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    elif len(state.m) != len(params):
        raise ShapeError("adam_step", "len(state.m)", len(params), len(state.m))

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape:
            raise ShapeError("adam_step", p.name or f"param[{i}]", p.shape, g.shape)
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.data = (p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.data.dtype, copy=False)
    return state


def global_norm(grads: Sequence[np.ndarray | None]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads if g is not None)))


def clip_grad_norm(grads: Sequence[np.ndarray | None], max_norm: float) -> tuple[list, float]:
    """Scale ``grads`` so their joint L2 norm is at most ``max_norm``."""
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return list(grads), norm
    scale = max_norm / norm
    return [None if g is None else g * scale for g in grads], norm


class Adam:
    """Stateful wrapper that reads gradients from ``param.grad``."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    def step(self, grads: Sequence[np.ndarray | None] | None = None) -> None:
        if grads is None:
            grads = [p.grad for p in self.params]
        adam_step(self.params, grads, self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
