"""Two-user autoencoder model: parameters, frozen statistics, encode/decode."""

from __future__ import annotations

import copy
import logging

import numpy as np

from ..channel import SeededRng
from ..ndgrad import Tensor, no_grad, precision, sigmoid
from .config import VARIANTS, ArchConfig
from .interleaver import Interleaver
from .networks import DeepICNet, Network, make_network
from .normalize import BatchStats, power_normalize

log = logging.getLogger(__name__)

USERS = (1, 2)


def bits_to_symbols(bits) -> np.ndarray:
    """Map bits {0, 1} to {-1, +1}."""
    return 2.0 * np.asarray(bits, dtype=np.float64) - 1.0


class AutoencoderModel:
    """Encoders and decoders of both users plus their frozen normalization stats.

    ``params`` maps names such as ``u1.enc.b2.conv0.w`` to leaf tensors. The
    model is a plain container: training code mutates ``params`` through the
    optimizer and writes ``frozen_stats`` when the run finishes.
    """

    def __init__(self, kind: str, arch: ArchConfig, seed: int, params: dict[str, Tensor] | None = None):
        if kind not in VARIANTS:
            raise ValueError(f"unknown variant kind {kind!r}; choose from {', '.join(VARIANTS)}")
        self.kind = kind
        self.arch = arch
        self.seed = int(seed)
        self.net: Network = make_network(kind, arch)
        self.params: dict[str, Tensor] = params if params is not None else {}
        self.frozen_stats: dict[int, BatchStats] = {}

    # -- parameter bookkeeping --------------------------------------------------
    def shape_table(self) -> dict:
        table = {}
        for user in USERS:
            table.update(self.net.encoder_shapes(user))
            table.update(self.net.decoder_shapes(user))
        return table

    def initialize(self) -> None:
        """Fan-in uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), one stream per parameter."""
        self.params = {}
        for name, (shape, fan_in) in self.shape_table().items():
            bound = 1.0 / np.sqrt(fan_in)
            n = int(np.prod(shape))
            u = SeededRng(self.seed, f"init/{name}").uniform(n)
            self.params[name] = Tensor(((2.0 * u - 1.0) * bound).reshape(shape), requires_grad=True, name=name)

    def encoder_param_names(self, user: int | None = None) -> list[str]:
        users = USERS if user is None else (user,)
        return [n for u in users for n in self.net.encoder_shapes(u)]

    def decoder_param_names(self, user: int | None = None) -> list[str]:
        users = USERS if user is None else (user,)
        return [n for u in users for n in self.net.decoder_shapes(u)]

    def encoder_params(self, user: int | None = None) -> list[Tensor]:
        return [self.params[n] for n in self.encoder_param_names(user)]

    def decoder_params(self, user: int | None = None) -> list[Tensor]:
        return [self.params[n] for n in self.decoder_param_names(user)]

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def copy(self) -> "AutoencoderModel":
        other = AutoencoderModel(self.kind, self.arch, self.seed)
        other.params = {}
        for n, p in self.params.items():
            with precision(p.data.dtype):
                other.params[n] = Tensor(p.data.copy(), requires_grad=p.requires_grad, name=n)
        other.frozen_stats = copy.deepcopy(self.frozen_stats)
        return other

    def astype(self, dtype) -> "AutoencoderModel":
        for p in self.params.values():
            p.data = p.data.astype(dtype)
        return self

    # -- forward passes -----------------------------------------------------------
    def encode_raw(self, user: int, bits, interleaver: Interleaver | None = None) -> Tensor:
        bits = np.asarray(bits)
        if bits.ndim == 1:
            bits = bits[None, :]
        self.net.check_length(bits.shape[1])
        x = Tensor(bits_to_symbols(bits)[:, None, :])
        if interleaver is not None:
            if not isinstance(self.net, DeepICNet):
                raise ValueError(f"{self.kind} has no interleaved branch")
            return self.net.encode_raw(self.params, user, x, interleaver=interleaver)
        return self.net.encode_raw(self.params, user, x)

    def encode(
        self, user: int, bits, mode: str = "frozen", interleaver: Interleaver | None = None
    ) -> tuple[Tensor, BatchStats]:
        """Codewords (J, 3, K) for ``bits`` (J, K), power normalized.

        ``mode="batch"`` normalizes with the statistics of this batch (and
        differentiates through them); ``mode="frozen"`` applies the stored
        statistics, which makes the output independent of batch size.
        """
        raw = self.encode_raw(user, bits, interleaver)
        if mode == "batch":
            return power_normalize(raw, self.arch.norm_mode, None, self.arch.norm_eps)
        if mode == "frozen":
            stats = self.frozen_stats.get(user)
            if stats is None:
                raise RuntimeError(f"user {user} has no frozen statistics; train or calibrate the model first")
            return power_normalize(raw, self.arch.norm_mode, stats, self.arch.norm_eps)
        raise ValueError(f"stats mode must be 'batch' or 'frozen', got {mode!r}")

    def decode_logits(self, user: int, y, interleaver: Interleaver | None = None) -> Tensor:
        y = y if isinstance(y, Tensor) else Tensor(y)
        if y.ndim != 3 or y.shape[1] != 3:
            raise ValueError(f"received streams must have shape (J, 3, K), got {y.shape}")
        self.net.check_length(y.shape[2])
        if interleaver is not None:
            if not isinstance(self.net, DeepICNet):
                raise ValueError(f"{self.kind} has no interleaved decoder")
            return self.net.decode_logits(self.params, user, y, interleaver=interleaver)
        return self.net.decode_logits(self.params, user, y)

    def posterior(self, user: int, y, interleaver: Interleaver | None = None) -> np.ndarray:
        """P(b = 1 | y) per position, strictly inside (0, 1)."""
        with no_grad():
            return sigmoid(self.decode_logits(user, y, interleaver)).data

    def calibrate(self, rng: SeededRng, K: int, blocks: int = 1000) -> None:
        """Set frozen statistics from one batch of random messages."""
        for user in USERS:
            bits = rng.child(f"calibrate/u{user}").bits((blocks, K))
            _, stats = self.encode(user, bits, mode="batch")
            self.frozen_stats[user] = stats


def build_variant(kind: str, arch_config: ArchConfig | dict | None = None, seed: int = 0) -> AutoencoderModel:
    """Construct and initialize a model of the given kind."""
    arch = arch_config if isinstance(arch_config, ArchConfig) else ArchConfig.from_dict(arch_config)
    model = AutoencoderModel(kind, arch, seed)
    model.initialize()
    return model


# -- functional entry points -----------------------------------------------------


def encode(model: AutoencoderModel, bits, user: int = 1, stats_mode: str = "frozen"):
    """Normalized codeword triple (J, 3, K) as an array, plus the statistics applied."""
    codes, stats = model.encode(user, bits, stats_mode)
    return codes.data, stats


def encode_interleaved(model: AutoencoderModel, interleaver: Interleaver, bits, user: int = 1, stats_mode="frozen"):
    codes, stats = model.encode(user, bits, stats_mode, interleaver=interleaver)
    return codes.data, stats


def _stack_streams(y1, y2, y3) -> np.ndarray:
    y = np.stack([np.asarray(y1), np.asarray(y2), np.asarray(y3)], axis=-2)
    if y.shape[-2] != 3 or np.shape(y1) != np.shape(y2) or np.shape(y1) != np.shape(y3):
        raise ValueError(f"stream lengths differ: {np.shape(y1)}, {np.shape(y2)}, {np.shape(y3)}")
    return y if y.ndim == 3 else y[None]


def decode(model: AutoencoderModel, y1, y2, y3, user: int = 1) -> np.ndarray:
    """Bit posteriors from the three received streams (each (K,) or (J, K))."""
    y = _stack_streams(y1, y2, y3)
    out = model.posterior(user, y)
    return out[0] if np.ndim(y1) == 1 else out


def decode_interleaved(model: AutoencoderModel, interleaver: Interleaver, y1, y2, y3, user: int = 1) -> np.ndarray:
    y = _stack_streams(y1, y2, y3)
    out = model.posterior(user, y, interleaver=interleaver)
    return out[0] if np.ndim(y1) == 1 else out
