"""Two-user transmission schemes built from classic codes.

Every scheme exposes ``encode(b1, b2) -> (c1, c2)`` producing real channel
symbols of equal shape, and ``decode(y1, y2, params) -> (b1_hat, b2_hat)``.
Channel symbols then pass through :func:`deepic.channel.transmit`.

Tail bits enlarge a block beyond 3K symbols. With ``count_tail_energy`` the
amplitudes are scaled so that a whole block carries the energy of 3K
unit-power symbols.
"""

from __future__ import annotations

import math

import numpy as np

from ..channel import ChannelParams, transmit
from .convcode import ConvCode, conv_encode, viterbi_decode
from .modulation import BPSK, Constellation
from .turbo import TurboCode, TurboStreams, turbo_decode_llr, turbo_encode


class TurboBPSK:
    """Both users send turbo-coded BPSK over every slot.

    With ``treat_interference_as_noise`` the receiver inflates the noise
    variance by the interference power ``h^2 a^2`` when forming LLRs (TIN);
    otherwise it assumes an interference-free channel (point-to-point).
    """

    def __init__(self, K: int, treat_interference_as_noise: bool = True, iterations: int = 6,
                 interleaver_seed: int = 0, count_tail_energy: bool = True):
        self.K = K
        self.code = TurboCode(K, interleaver_seed=interleaver_seed, iterations=iterations)
        self.tin = treat_interference_as_noise
        n = self.code.coded_length()
        self.amplitude = math.sqrt(3 * K / n) if count_tail_energy else 1.0
        self.name = "tin" if treat_interference_as_noise else "turbo_p2p"

    def encode(self, b1, b2):
        return tuple(self.amplitude * (2.0 * turbo_encode(self.code, b).flatten() - 1.0) for b in (b1, b2))

    def _decode_one(self, y, params: ChannelParams):
        a = self.amplitude
        var = params.sigma**2 + (params.h**2 * a * a if self.tin else 0.0)
        llr = 2.0 * a * np.asarray(y) / max(var, 1e-12)
        return turbo_decode_llr(self.code, TurboStreams.split(llr, self.K))

    def decode(self, y1, y2, params: ChannelParams):
        return self._decode_one(y1, params), self._decode_one(y2, params)


class TimeDivision:
    """Users alternate halves of the block, each sending turbo-coded 4-PAM.

    User 1 owns the first half of the slots and user 2 the second, so the
    receivers never see interference. ``power_policy="equal_block_energy"``
    boosts the active half by sqrt(2) so each user's average power over the
    whole block is one; ``"equal_symbol_power"`` leaves symbols at unit power.
    """

    name = "td"

    def __init__(self, K: int, iterations: int = 6, interleaver_seed: int = 0,
                 power_policy: str = "equal_block_energy", count_tail_energy: bool = True):
        if (3 * K) % 2:
            raise ValueError(f"time division packs 3K coded bits into 4-PAM pairs; 3K={3 * K} is odd")
        if power_policy not in ("equal_block_energy", "equal_symbol_power"):
            raise ValueError(f"unknown power policy {power_policy!r}")
        self.K = K
        self.code = TurboCode(K, interleaver_seed=interleaver_seed, iterations=iterations)
        n_bits = self.code.coded_length()
        self.half = n_bits // 2
        boost = math.sqrt(2.0) if power_policy == "equal_block_energy" else 1.0
        tail = math.sqrt(3 * K / n_bits) if count_tail_energy else 1.0
        self.constellation = Constellation("pam4", scale=boost * tail)

    def encode(self, b1, b2):
        x1 = self.constellation.modulate(turbo_encode(self.code, b1).flatten())
        x2 = self.constellation.modulate(turbo_encode(self.code, b2).flatten())
        zeros = np.zeros_like(x1)
        return np.concatenate([x1, zeros], axis=-1), np.concatenate([zeros, x2], axis=-1)

    def _decode_half(self, y, params: ChannelParams):
        llr = self.constellation.demodulate_llr(y, params.sigma**2)
        return turbo_decode_llr(self.code, TurboStreams.split(llr, self.K))

    def decode(self, y1, y2, params: ChannelParams):
        y1, y2 = np.atleast_2d(y1), np.atleast_2d(y2)
        return self._decode_half(y1[:, : self.half], params), self._decode_half(y2[:, self.half :], params)


class ConvBPSK:
    """Rate-1/3 feedforward convolutional code with Viterbi decoding."""

    name = "conv_p2p"

    def __init__(self, K: int, generators=(13, 15, 17), count_tail_energy: bool = True):
        self.K = K
        self.code = ConvCode(generators, recursive=False, terminated=True)
        n = self.code.coded_length(K)
        self.amplitude = math.sqrt(3 * K / n) if count_tail_energy else 1.0

    def encode(self, b1, b2):
        return tuple(self.amplitude * (2.0 * conv_encode(self.code, np.atleast_2d(b)) - 1.0) for b in (b1, b2))

    def decode(self, y1, y2, params: ChannelParams):
        return tuple(viterbi_decode(self.code, np.atleast_2d(y) / self.amplitude) for y in (y1, y2))


class UncodedBPSK:
    """One BPSK symbol per bit, hard decisions."""

    name = "uncoded"

    def __init__(self, K: int):
        self.K = K

    def encode(self, b1, b2):
        return BPSK.modulate(np.atleast_2d(b1)), BPSK.modulate(np.atleast_2d(b2))

    def decode(self, y1, y2, params: ChannelParams):
        return (np.asarray(y1) > 0).astype(np.int8), (np.asarray(y2) > 0).astype(np.int8)


def _transmit_decode(scheme, b1, b2, params: ChannelParams, rng):
    c1, c2 = scheme.encode(np.atleast_2d(b1), np.atleast_2d(b2))
    y1, y2 = transmit(c1, c2, params, rng)
    return scheme.decode(y1, y2, params)


def tin_transmit_decode(b1, b2, params: ChannelParams, rng=None, **kwargs):
    """Send both messages with TIN over the interference channel and decode."""
    K = np.atleast_2d(b1).shape[1]
    return _transmit_decode(TurboBPSK(K, treat_interference_as_noise=True, **kwargs), b1, b2, params, rng)


def td_transmit_decode(b1, b2, params: ChannelParams, rng=None, **kwargs):
    """Send both messages with time division over the interference channel and decode."""
    K = np.atleast_2d(b1).shape[1]
    return _transmit_decode(TimeDivision(K, **kwargs), b1, b2, params, rng)


BASELINES = ("tin", "td", "turbo_p2p", "conv_p2p", "uncoded")


def make_baseline(name: str, K: int, **kwargs):
    if name == "tin":
        return TurboBPSK(K, treat_interference_as_noise=True, **kwargs)
    if name == "turbo_p2p":
        return TurboBPSK(K, treat_interference_as_noise=False, **kwargs)
    if name == "td":
        return TimeDivision(K, **kwargs)
    if name == "conv_p2p":
        return ConvBPSK(K, **kwargs)
    if name == "uncoded":
        return UncodedBPSK(K)
    raise ValueError(f"unknown baseline scheme {name!r}; choose from {', '.join(BASELINES)}")
