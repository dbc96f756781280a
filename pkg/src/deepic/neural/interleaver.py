from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import SeededRng


@dataclass(frozen=True)
class Interleaver:
    """A fixed permutation of block positions.

    ``interleave(x)[..., i] = x[..., perm[i]]``; ``deinterleave`` undoes it.
    """

    perm: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.intp)
        if perm.ndim != 1 or not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValueError("interleaver must be a permutation of range(K)")
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "inverse", np.argsort(perm))

    @classmethod
    def from_seed(cls, K: int, seed: int) -> "Interleaver":
        return cls(SeededRng(seed, f"interleaver/{K}").permutation(K), seed)

    @classmethod
    def identity(cls, K: int) -> "Interleaver":
        return cls(np.arange(K))

    def __len__(self) -> int:
        return self.perm.size

    def interleave(self, x: np.ndarray, axis: int = -1) -> np.ndarray:
        return np.take(x, self.perm, axis=axis)

    def deinterleave(self, x: np.ndarray, axis: int = -1) -> np.ndarray:
        return np.take(x, self.inverse, axis=axis)
