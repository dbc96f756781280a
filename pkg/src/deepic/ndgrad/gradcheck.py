"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, precision, zero_grad


def numerical_grad(fn: Callable[[], Tensor], param: Tensor, eps: float = 1e-5) -> np.ndarray:
    """d fn() / d param by central differences; ``fn`` must rebuild its graph."""
    grad = np.zeros_like(param.data)
    base = param.data
    flat = base.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        bumped = flat.copy()
        bumped[i] = orig + eps
        param.data = bumped.reshape(base.shape)
        f_plus = fn().item()
        bumped[i] = orig - eps
        param.data = bumped.reshape(base.shape)
        f_minus = fn().item()
        grad.reshape(-1)[i] = (f_plus - f_minus) / (2 * eps)
    param.data = base
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Normwise relative error ``|a - n| / max(|a|, |n|)`` (0 when both vanish)."""
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def gradcheck(fn: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-5) -> float:
    """Largest relative error between backprop and finite differences over ``params``.

    Runs in float64 regardless of the ambient precision.
    """
    with precision(np.float64):
        zero_grad(params)
        fn().backward()
        analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
        worst = 0.0
        for p, a in zip(params, analytic):
            worst = max(worst, relative_error(a, numerical_grad(fn, p, eps)))
        zero_grad(params)
    return worst
