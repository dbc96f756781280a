"""Two-user symmetric AWGN interference channel and seeded noise streams.

Receiver ``i`` observes its own codeword, the other user's codeword scaled by
the interference gain ``h``, and independent Gaussian noise::

    y1 = c1 + h * c2 + z1
    y2 = h * c1 + c2 + z2

Randomness comes from :class:`SeededRng`, a Philox counter-based generator
keyed by ``(seed, stream)``. Normal variates are produced by Box-Muller from
the raw 64-bit counter output, so a given ``(seed, stream)`` always yields the
same sequence independent of NumPy's own sampling routines.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

_TWO_PI = 2.0 * math.pi
_U53 = 2.0**-53


def snr_to_sigma(snr_db: float) -> float:
    """Noise standard deviation for ``snr_db = -10 log10(sigma^2)``."""
    return 10.0 ** (-float(snr_db) / 20.0)


def sigma_to_snr(sigma: float) -> float:
    if sigma <= 0:
        raise ValueError("sigma must be positive to express as an SNR")
    return -20.0 * math.log10(sigma)


@dataclass(frozen=True)
class ChannelParams:
    """Interference gain ``h`` and noise standard deviation ``sigma``.

    ``noise_correlation`` couples ``z2`` to ``z1``; the default 0 gives the
    usual independent receivers.
    """

    h: float
    sigma: float
    noise_correlation: float = 0.0

    def __post_init__(self):
        if self.h < 0:
            raise ValueError(f"interference gain h must be >= 0, got {self.h}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not -1.0 <= self.noise_correlation <= 1.0:
            raise ValueError("noise_correlation must lie in [-1, 1]")

    @classmethod
    def from_snr(cls, h: float, snr_db: float, noise_correlation: float = 0.0) -> "ChannelParams":
        return cls(h=h, sigma=snr_to_sigma(snr_db), noise_correlation=noise_correlation)

    @property
    def snr_db(self) -> float:
        return sigma_to_snr(self.sigma)


def _key_from(seed: int, stream: str) -> int:
    digest = hashlib.blake2b(f"{int(seed)}\x1f{stream}".encode(), digest_size=16).digest()
    return int.from_bytes(digest, "little")


class SeededRng:
    """Deterministic random source identified by ``(seed, stream)``.

    Two instances built from the same pair produce identical draws; distinct
    stream names give independent keys. ``child(name)`` derives a sub-stream
    ``"<stream>/<name>"`` without consuming anything from the parent.
    """

    def __init__(self, seed: int, stream: str = "root"):
        self.seed = int(seed)
        self.stream = str(stream)
        self._bitgen = np.random.Philox(key=_key_from(self.seed, self.stream))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream={self.stream!r})"

    def child(self, name: str) -> "SeededRng":
        return SeededRng(self.seed, f"{self.stream}/{name}")

    def raw(self, count: int) -> np.ndarray:
        return self._bitgen.random_raw(int(count)).astype(np.uint64, copy=False)

    def uniform(self, count: int) -> np.ndarray:
        """Uniform doubles on (0, 1], 53-bit resolution."""
        return ((self.raw(count) >> np.uint64(11)).astype(np.float64) + 1.0) * _U53

    def gaussian(self, count: int) -> np.ndarray:
        """``count`` i.i.d. N(0, 1) samples via Box-Muller."""
        count = int(count)
        if count < 0:
            raise ValueError("count must be non-negative")
        pairs = (count + 1) // 2
        u1 = self.uniform(pairs)
        u2 = self.uniform(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = _TWO_PI * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:count]

    def normal(self, shape, scale: float = 1.0) -> np.ndarray:
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        return (scale * self.gaussian(n)).reshape(shape)

    def bits(self, shape) -> np.ndarray:
        """Equiprobable {0, 1} bits as int8."""
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        return (self.raw(n) >> np.uint64(63)).astype(np.int8).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Uniform random permutation of ``range(n)`` (Fisher-Yates on the raw stream)."""
        perm = np.arange(n)
        if n < 2:
            return perm
        draws = self.uniform(n - 1)
        for i in range(n - 1, 0, -1):
            j = min(int(draws[n - 1 - i] * (i + 1)), i)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def uniform_range(self, low: float, high: float) -> float:
        return float(low + (high - low) * (1.0 - self.uniform(1)[0]))


def gaussian(rng: SeededRng, count: int) -> np.ndarray:
    return rng.gaussian(count)


def draw_noise(rng: SeededRng, shape, params: ChannelParams) -> tuple[np.ndarray, np.ndarray]:
    """Noise pair ``(z1, z2)`` of the given shape for ``params``."""
    z1 = rng.child("z1").normal(shape)
    z2 = rng.child("z2").normal(shape)
    rho = params.noise_correlation
    if rho:
        z2 = rho * z1 + math.sqrt(1.0 - rho * rho) * z2
    return params.sigma * z1, params.sigma * z2


def _shape_of(x) -> tuple[int, ...]:
    return tuple(x.shape) if hasattr(x, "shape") else np.shape(x)


def transmit(c1, c2, params: ChannelParams, rng: SeededRng | None = None, noise=None):
    """Pass both users' codewords through the interference channel.

    ``c1`` and ``c2`` may be NumPy arrays or autodiff tensors of identical
    shape; for the neural codes that shape is (J, 3, K) so the outputs stay
    split into the three per-branch streams. Noise is either drawn from
    ``rng`` or supplied explicitly as ``noise=(z1, z2)``.
    """
    shape = _shape_of(c1)
    if shape != _shape_of(c2):
        raise ValueError(f"codeword shapes differ: {shape} vs {_shape_of(c2)}")
    h = params.h
    if noise is None:
        if params.sigma == 0:
            z1 = z2 = None
        else:
            if rng is None:
                raise ValueError("an rng is required for a noisy channel")
            z1, z2 = draw_noise(rng, shape, params)
    else:
        z1, z2 = noise
    y1 = c1 + h * c2
    y2 = h * c1 + c2
    if z1 is not None:
        y1 = y1 + z1
        y2 = y2 + z2
    return y1, y2
