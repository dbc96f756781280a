"""Classic channel codes and the TD / TIN interference baselines."""

from .bcjr import bcjr_decode
from .convcode import ConvCode, conv_encode, octal, viterbi_decode
from .modulation import BPSK, PAM4, Constellation
from .schemes import (
    BASELINES,
    ConvBPSK,
    TimeDivision,
    TurboBPSK,
    UncodedBPSK,
    make_baseline,
    td_transmit_decode,
    tin_transmit_decode,
)
from .turbo import TurboCode, TurboStreams, turbo_decode, turbo_decode_llr, turbo_encode

__all__ = [
    "BASELINES",
    "BPSK",
    "PAM4",
    "Constellation",
    "ConvBPSK",
    "ConvCode",
    "TimeDivision",
    "TurboBPSK",
    "TurboCode",
    "TurboStreams",
    "UncodedBPSK",
    "bcjr_decode",
    "conv_encode",
    "make_baseline",
    "octal",
    "td_transmit_decode",
    "tin_transmit_decode",
    "turbo_decode",
    "turbo_decode_llr",
    "turbo_encode",
    "viterbi_decode",
]
