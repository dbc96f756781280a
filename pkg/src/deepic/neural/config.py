"""Architecture descriptor shared by every autoencoder variant."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

VARIANTS = ("deepic", "deepic_interleaved", "cnn_ae", "rnn_ae", "ff_ae")


@dataclass(frozen=True)
class ArchConfig:
    """Layer widths and structural switches.

    Defaults follow the reference DeepIC layout: two width-5 conv layers per
    encoder branch, five per decoder block, feature size 5, six decoder
    iterations, 64 hidden channels and ELU activations.
    """

    enc_channels: int = 64
    enc_kernel: int = 5
    enc_layers: int = 2
    dec_channels: int = 64
    dec_kernel: int = 5
    dec_layers: int = 5
    feature_size: int = 5
    iterations: int = 6
    activation: str = "elu"
    shared_iteration_weights: bool = True
    # "scalar": one mean/std per branch; "position": one per branch and position
    norm_mode: str = "scalar"
    norm_eps: float = 1e-6
    ema_decay: float = 0.99
    interleaver_seed: int = 0
    interleave_y1: bool = False
    rnn_hidden: int = 64
    rnn_layers: int = 2
    ff_hidden: int = 256
    ff_layers: int = 2
    block_length: int | None = None

    def __post_init__(self):
        for name in (
            "enc_channels",
            "enc_kernel",
            "enc_layers",
            "dec_channels",
            "dec_kernel",
            "dec_layers",
            "feature_size",
            "iterations",
            "rnn_hidden",
            "rnn_layers",
            "ff_hidden",
            "ff_layers",
        ):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValueError(f"arch.{name} must be a positive integer, got {value!r}")
        for name in ("enc_kernel", "dec_kernel"):
            if getattr(self, name) % 2 == 0:
                raise ValueError(f"arch.{name} must be odd, got {getattr(self, name)}")
        if self.norm_mode not in ("scalar", "position"):
            raise ValueError(f"arch.norm_mode must be 'scalar' or 'position', got {self.norm_mode!r}")
        if not self.norm_eps > 0:
            raise ValueError("arch.norm_eps must be positive")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("arch.ema_decay must lie in [0, 1)")
        if self.block_length is not None and self.block_length < 1:
            raise ValueError("arch.block_length must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict | None) -> "ArchConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown arch key(s): {', '.join(unknown)}")
        return cls(**data)

    def encoder_radius(self) -> int:
        """Receptive-field radius of one encoder branch, in positions."""
        return self.enc_layers * (self.enc_kernel - 1) // 2
