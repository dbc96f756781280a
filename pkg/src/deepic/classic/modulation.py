"""BPSK and Gray-labelled 4-PAM mapping with exact bit-LLR demapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Gray labels for levels -3, -1, +1, +3 (first bit, second bit)
_PAM4_LABELS = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.int8)
_PAM4_LEVELS = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(5.0)


@dataclass(frozen=True)
class Constellation:
    """Real constellation with unit average power times ``scale``."""

    kind: str = "bpsk"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("bpsk", "pam4"):
            raise ValueError(f"unknown constellation {self.kind!r}")

    @property
    def bits_per_symbol(self) -> int:
        return 1 if self.kind == "bpsk" else 2

    @property
    def levels(self) -> np.ndarray:
        base = np.array([-1.0, 1.0]) if self.kind == "bpsk" else _PAM4_LEVELS
        return self.scale * base

    @property
    def labels(self) -> np.ndarray:
        return np.array([[0], [1]], dtype=np.int8) if self.kind == "bpsk" else _PAM4_LABELS

    def average_power(self) -> float:
        return float(np.mean(self.levels**2))

    def modulate(self, bits) -> np.ndarray:
        """Map bits (..., m * s) to symbols (..., s)."""
        bits = np.asarray(bits, dtype=np.int64)
        k = self.bits_per_symbol
        if bits.shape[-1] % k:
            raise ValueError(f"bit count {bits.shape[-1]} not divisible by {k}")
        if k == 1:
            return self.scale * (2.0 * bits - 1.0)
        pairs = bits.reshape(*bits.shape[:-1], -1, 2)
        # Gray decode: label (b0, b1) -> level index
        index = 2 * pairs[..., 0] + (pairs[..., 0] ^ pairs[..., 1])
        return self.levels[index]

    def demodulate_llr(self, y, noise_var: float) -> np.ndarray:
        """Exact per-bit LLRs ``log P(b=1|y) / P(b=0|y)`` for AWGN of ``noise_var``."""
        y = np.asarray(y, dtype=np.float64)
        noise_var = max(float(noise_var), 1e-12)
        if self.kind == "bpsk":
            return 2.0 * self.scale * y / noise_var
        metric = -((y[..., None] - self.levels) ** 2) / (2.0 * noise_var)  # (..., 4)
        llrs = []
        for b in range(2):
            ones = self.labels[:, b] == 1
            llrs.append(np.logaddexp.reduce(metric[..., ones], axis=-1) - np.logaddexp.reduce(metric[..., ~ones], axis=-1))
        return np.stack(llrs, axis=-1).reshape(*y.shape[:-1], -1)


BPSK = Constellation("bpsk")
PAM4 = Constellation("pam4")
