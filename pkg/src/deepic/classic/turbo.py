"""Rate-1/3 parallel-concatenated (turbo) code with iterative BCJR decoding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channel import SeededRng
from .bcjr import bcjr_decode
from .convcode import ConvCode, conv_encode


@dataclass(frozen=True)
class TurboStreams:
    """Systematic, two parity streams (N, K) and the first encoder's tail (N, 2m)."""

    systematic: np.ndarray
    parity1: np.ndarray
    parity2: np.ndarray
    tail: np.ndarray

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.systematic, self.parity1, self.parity2, self.tail], axis=-1)

    @classmethod
    def split(cls, flat: np.ndarray, K: int) -> "TurboStreams":
        flat = np.atleast_2d(flat)
        return cls(flat[:, :K], flat[:, K : 2 * K], flat[:, 2 * K : 3 * K], flat[:, 3 * K :])


@dataclass(frozen=True)
class TurboCode:
    """Two identical recursive systematic constituents joined by an interleaver.

    The first constituent is terminated with tail bits; the second is left
    open, which is the usual arrangement for a random interleaver.
    """

    K: int
    generators: tuple = (13, 15)
    interleaver_seed: int = 0
    iterations: int = 6
    perm: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        object.__setattr__(self, "perm", SeededRng(self.interleaver_seed, f"turbo-interleaver/{self.K}").permutation(self.K))
        object.__setattr__(self, "inverse", np.argsort(self.perm))
        object.__setattr__(self, "rsc1", ConvCode(self.generators, recursive=True, terminated=True))
        object.__setattr__(self, "rsc2", ConvCode(self.generators, recursive=True, terminated=False))

    @property
    def memory(self) -> int:
        return self.rsc1.memory

    @property
    def tail_bits(self) -> int:
        return 2 * self.memory

    def coded_length(self) -> int:
        return 3 * self.K + self.tail_bits

    def interleave(self, x: np.ndarray) -> np.ndarray:
        return x[..., self.perm]

    def deinterleave(self, x: np.ndarray) -> np.ndarray:
        return x[..., self.inverse]


def turbo_encode(code: TurboCode, bits) -> TurboStreams:
    bits = np.atleast_2d(np.asarray(bits, dtype=np.int8))
    N, K = bits.shape
    if K != code.K:
        raise ValueError(f"turbo code is for K={code.K}, got blocks of length {K}")
    m = code.memory
    c1 = conv_encode(code.rsc1, bits).reshape(N, K + m, 2)
    c2 = conv_encode(code.rsc2, code.interleave(bits)).reshape(N, K, 2)
    tail = np.concatenate([c1[:, K:, 0], c1[:, K:, 1]], axis=1)
    return TurboStreams(c1[:, :K, 0].copy(), c1[:, :K, 1].copy(), c2[:, :, 1].copy(), tail)


def turbo_decode_llr(code: TurboCode, llrs: TurboStreams, iterations: int | None = None) -> np.ndarray:
    """Hard decisions from channel LLRs of all coded bits."""
    iterations = code.iterations if iterations is None else iterations
    K, m = code.K, code.memory
    ls, lp1, lp2 = (np.atleast_2d(a).astype(np.float64) for a in (llrs.systematic, llrs.parity1, llrs.parity2))
    tail = np.atleast_2d(llrs.tail).astype(np.float64)
    N = ls.shape[0]
    ch1 = np.zeros((N, K + m, 2))
    ch1[:, :K, 0] = ls
    ch1[:, :K, 1] = lp1
    ch1[:, K:, 0] = tail[:, :m]
    ch1[:, K:, 1] = tail[:, m:]
    ch2 = np.stack([code.interleave(ls), lp2], axis=-1)

    ext21 = np.zeros((N, K))
    post2 = None
    for _ in range(iterations):
        _, ext1 = bcjr_decode(code.rsc1, ch1, ext21)
        post2, ext2 = bcjr_decode(code.rsc2, ch2, code.interleave(ext1))
        ext21 = code.deinterleave(ext2)
    return (code.deinterleave(post2) > 0).astype(np.int8)


def turbo_decode(code: TurboCode, received: TurboStreams, noise_var: float, iterations: int | None = None, amplitude: float = 1.0):
    """Decode BPSK symbols ``amplitude * (2c - 1) + noise``."""
    scale = 2.0 * amplitude / max(float(noise_var), 1e-12)
    llrs = TurboStreams(*(scale * np.atleast_2d(a) for a in (received.systematic, received.parity1, received.parity2, received.tail)))
    return turbo_decode_llr(code, llrs, iterations)
