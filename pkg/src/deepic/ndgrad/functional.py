"""Layer primitives: activations, 1-D convolution, dense, GRU cell, BCE loss."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import NdGradError, ShapeError, Tensor, add, as_tensor, concat, mul

# -- activations ---------------------------------------------------------------


def _sigmoid_array(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    # keep the result strictly inside (0, 1) even when saturated
    info = np.finfo(x.dtype)
    return np.clip(out, info.tiny, 1.0 - info.epsneg)


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid_array(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor._from_op(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def elu(x: Tensor, alpha: float = 1.0) -> Tensor:
    pos = x.data > 0
    neg_part = alpha * np.expm1(np.minimum(x.data, 0.0))
    out = np.where(pos, x.data, neg_part)

    def backward(g):
        return (g * np.where(pos, 1.0, neg_part + alpha),)

    return Tensor._from_op(out, (x,), backward, "elu")


ACTIVATIONS = {"elu": elu, "relu": relu, "tanh": tanh, "sigmoid": sigmoid}


def activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None


# -- convolution and affine layers ---------------------------------------------


def conv1d(x: Tensor, kernel: Tensor, bias: Tensor | None = None) -> Tensor:
    """Stride-1 cross-correlation with zero 'same' padding.

    ``out[b, o, i] = bias[o] + sum_{c, w} kernel[o, c, w] * x[b, c, i + w - (W - 1) // 2]``

    Shapes: ``x`` (B, C_in, L), ``kernel`` (C_out, C_in, W) with W odd,
    ``bias`` (C_out,). The output is (B, C_out, L).
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 3:
        raise ShapeError("conv1d", "input.ndim", 3, x.ndim)
    if kernel.ndim != 3:
        raise ShapeError("conv1d", "kernel.ndim", 3, kernel.ndim)
    B, C_in, L = x.shape
    C_out, K_in, W = kernel.shape
    if K_in != C_in:
        raise ShapeError("conv1d", "C_in", C_in, K_in)
    if W % 2 == 0:
        raise ShapeError("conv1d", "W (must be odd)", "odd", W)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (C_out,):
            raise ShapeError("conv1d", "bias.C_out", (C_out,), bias.shape)

    pad = (W - 1) // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad))) if pad else x.data
    cols = sliding_window_view(xp, W, axis=2)  # (B, C_in, L, W)
    # (B, L, C_out) -> (B, C_out, L)
    out = np.tensordot(cols, kernel.data, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
    if bias is not None:
        out = out + bias.data[None, :, None]
    else:
        out = np.ascontiguousarray(out)

    def backward(g):
        gx = gk = gb = None
        if kernel.requires_grad:
            gk = np.tensordot(g, cols, axes=([0, 2], [0, 2]))  # (C_out, C_in, W)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2))
        if x.requires_grad:
            gcols = np.tensordot(g, kernel.data, axes=([1], [0]))  # (B, L, C_in, W)
            gxp = np.zeros((B, C_in, L + 2 * pad), dtype=g.dtype)
            for w in range(W):
                gxp[:, :, w : w + L] += gcols[:, :, :, w].transpose(0, 2, 1)
            gx = gxp[:, :, pad : pad + L] if pad else gxp
        return (gx, gk) if bias is None else (gx, gk, gb)

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor._from_op(out, parents, backward, "conv1d")


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map ``x @ weight.T + bias`` with ``x`` (B, D_in), ``weight`` (D_out, D_in)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 2:
        raise ShapeError("dense", "input.ndim", 2, x.ndim)
    if weight.ndim != 2:
        raise ShapeError("dense", "weight.ndim", 2, weight.ndim)
    D_out, D_in = weight.shape
    if x.shape[1] != D_in:
        raise ShapeError("dense", "D_in", D_in, x.shape[1])
    out = x.data @ weight.data.T
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (D_out,):
            raise ShapeError("dense", "bias.D_out", (D_out,), bias.shape)
        out = out + bias.data

    def backward(g):
        gx = g @ weight.data if x.requires_grad else None
        gw = g.T @ x.data if weight.requires_grad else None
        if bias is None:
            return gx, gw
        return gx, gw, (g.sum(axis=0) if bias.requires_grad else None)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, parents, backward, "dense")


GRU_PARAM_NAMES = ("w_ih", "w_hh", "b_ih", "b_hh")


def gru_cell(x: Tensor, h: Tensor, params: dict) -> Tensor:
    """One GRU update with gates ordered (reset, update, candidate).

    ``params`` holds ``w_ih`` (3H, D_x), ``w_hh`` (3H, H), ``b_ih`` (3H,) and
    ``b_hh`` (3H,)::

        r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
        z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
        n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
        h' = (1 - z) * n + z * h
    """
    x, h = as_tensor(x), as_tensor(h)
    missing = [k for k in GRU_PARAM_NAMES if k not in params]
    if missing:
        raise NdGradError(f"gru_cell: missing parameters {missing}")
    H = h.shape[1]
    w_ih = params["w_ih"]
    if w_ih.shape[0] != 3 * H:
        raise ShapeError("gru_cell", "3*D_h", 3 * H, w_ih.shape[0])
    if h.shape[0] != x.shape[0]:
        raise ShapeError("gru_cell", "B", x.shape[0], h.shape[0])
    gi = dense(x, w_ih, params["b_ih"])
    gh = dense(h, params["w_hh"], params["b_hh"])
    r = sigmoid(gi[:, :H] + gh[:, :H])
    z = sigmoid(gi[:, H : 2 * H] + gh[:, H : 2 * H])
    n = tanh(gi[:, 2 * H :] + r * gh[:, 2 * H :])
    return add(mul(1.0 - z, n), mul(z, h))


# -- loss ---------------------------------------------------------------------


def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Mean binary cross-entropy in log-sum-exp form.

    Per element ``max(z, 0) - z t + log1p(exp(-|z|))``, which never forms
    ``log(sigmoid(z))`` and so stays finite for any finite logit.
    """
    logits = as_tensor(logits)
    t = np.asarray(targets.data if isinstance(targets, Tensor) else targets, dtype=logits.data.dtype)
    if t.shape != logits.shape:
        raise ShapeError("bce_with_logits", "targets", logits.shape, t.shape)
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("bce_with_logits: targets must be 0 or 1")
    z = logits.data
    per = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    n = z.size
    out = np.asarray(per.sum() / n, dtype=z.dtype)

    def backward(g):
        return (g * (_sigmoid_array(z) - t) / n,)

    return Tensor._from_op(out, (logits,), backward, "bce_with_logits")


__all__ = [
    "sigmoid",
    "tanh",
    "relu",
    "elu",
    "activation",
    "conv1d",
    "dense",
    "gru_cell",
    "bce_with_logits",
    "concat",
]
