"""Neural autoencoder codes for the two-user interference channel."""

from .checkpoint import CheckpointError, load, loads, save
from .config import VARIANTS, ArchConfig
from .interleaver import Interleaver
from .model import (
    AutoencoderModel,
    bits_to_symbols,
    build_variant,
    decode,
    decode_interleaved,
    encode,
    encode_interleaved,
)
from .normalize import BatchStats, power_normalize
from .perturbation import PerturbationResponse, perturbation_response

__all__ = [
    "ArchConfig",
    "AutoencoderModel",
    "BatchStats",
    "CheckpointError",
    "Interleaver",
    "PerturbationResponse",
    "VARIANTS",
    "bits_to_symbols",
    "build_variant",
    "decode",
    "decode_interleaved",
    "encode",
    "encode_interleaved",
    "load",
    "loads",
    "perturbation_response",
    "power_normalize",
    "save",
]
