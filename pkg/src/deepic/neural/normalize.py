"""Power normalization of encoder outputs."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..ndgrad import Tensor, maximum, sqrt

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BatchStats:
    """Per-branch mean and standard deviation.

    Arrays have shape (3,) in scalar mode and (3, K) in position mode.
    """

    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "BatchStats":
        return cls(np.asarray(data["mean"], dtype=np.float64), np.asarray(data["std"], dtype=np.float64))

    def ema(self, new: "BatchStats", decay: float) -> "BatchStats":
        return BatchStats(
            decay * self.mean + (1.0 - decay) * new.mean,
            decay * self.std + (1.0 - decay) * new.std,
        )


def _axes(mode: str):
    return (0, 2) if mode == "scalar" else (0,)


def _expand(arr: np.ndarray, mode: str) -> np.ndarray:
    return arr[None, :, None] if mode == "scalar" else arr[None, :, :]


def power_normalize(
    x: Tensor,
    mode: str = "scalar",
    stats: BatchStats | None = None,
    eps: float = 1e-6,
) -> tuple[Tensor, BatchStats]:
    """Map pre-normalization symbols ``x`` (J, 3, K) to zero mean, unit power.

    With ``stats=None`` the batch statistics are used and differentiated
    through (training). Otherwise the given frozen statistics are applied as
    constants. Returns the normalized tensor and the statistics applied.
    """
    if x.ndim != 3:
        raise ValueError(f"expected (J, branches, K) input, got shape {x.shape}")
    if stats is not None:
        mean = np.asarray(stats.mean, dtype=x.data.dtype)
        std = np.asarray(stats.std, dtype=x.data.dtype)
        if mode == "position" and mean.shape[-1] != x.shape[2]:
            raise ValueError(f"frozen position statistics are for K={mean.shape[-1]}, input has K={x.shape[2]}")
        return (x - _expand(mean, mode)) / _expand(std, mode), stats

    if x.shape[0] < 2:
        raise ValueError("batch-mode normalization needs at least 2 examples (J >= 2)")
    axes = _axes(mode)
    mu = x.mean(axis=axes, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=axes, keepdims=True)
    sd = sqrt(var)
    if np.any(sd.data < eps):
        log.warning("branch std below %.1e; clamping to the floor", eps)
        sd = maximum(sd, eps)
    squeeze = (0, 2) if mode == "scalar" else (0,)
    batch = BatchStats(
        np.squeeze(mu.data, axis=squeeze).astype(np.float64),
        np.squeeze(sd.data, axis=squeeze).astype(np.float64),
    )
    return centered / sd, batch
