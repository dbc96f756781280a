"""Joint training of both users' encoders and decoders.

Each epoch has an encoder phase (``enc_steps`` updates of every encoder
weight, decoders frozen) followed by a decoder phase (``dec_steps`` updates
of every decoder weight, encoders frozen). A step draws fresh messages and
noise, forms the per-user losses ``L1``, ``L2`` and descends on
``alpha * L1 + (1 - alpha) * L2``; afterwards ``alpha`` becomes
``L1 / (L1 + L2)`` so the user currently doing worse gets more weight.
"""

from __future__ import annotations

import contextlib
import csv
import dataclasses
import io
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelParams, SeededRng, draw_noise, transmit
from .evalbench import BerPoint, NeuralScheme, StoppingRule, estimate_ber
from .ndgrad import AdamState, NonFiniteError, Tensor, adam_step, bce_with_logits, clip_grad_norm, precision
from .neural import ArchConfig, AutoencoderModel, BatchStats, VARIANTS, build_variant, checkpoint

log = logging.getLogger(__name__)

PHASES = ("enc", "dec")
TRAINLOG_HEADER = ("epoch", "phase", "step", "L1", "L2", "L", "alpha", "beta")


class TrainingDiverged(RuntimeError):
    """A loss became non-finite; carries the last checkpoint taken before it."""

    def __init__(self, message: str, last_good: AutoencoderModel | None, path: Path | None = None):
        super().__init__(message)
        self.last_good = last_good
        self.path = path


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines a training run.

    ``dec_snr_db`` is a ``[low, high]`` range; each decoder batch draws its
    SNR uniformly from it. ``grad_clip=None`` disables clipping.
    """

    K: int = 100
    h: float = 0.8
    variant: str = "deepic"
    arch: dict = field(default_factory=dict)
    epochs: int = 100
    batch_size: int = 500
    enc_steps: int = 100
    dec_steps: int = 500
    enc_snr_db: float = 2.0
    dec_snr_db: tuple = (0.0, 6.0)
    alpha: float = 0.5
    alpha_update: str = "step"
    lr: float = 1e-4
    grad_clip: float | None = 1.0
    seed: int = 0
    dtype: str = "float64"
    noise_correlation: float = 0.0
    val_snr_db: float = 3.0
    val_blocks: int = 1000

    def __post_init__(self):
        for name in ("K", "epochs", "batch_size", "enc_steps", "dec_steps", "val_blocks"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 for batch power normalization")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.h < 0:
            raise ValueError("h must be >= 0")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.alpha_update not in ("step", "epoch"):
            raise ValueError(f"alpha_update must be 'step' or 'epoch', got {self.alpha_update!r}")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ValueError("grad_clip must be positive or null")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be 'float32' or 'float64', got {self.dtype!r}")
        lo, hi = (float(v) for v in self.dec_snr_db)
        if lo > hi:
            raise ValueError(f"dec_snr_db range is reversed: {self.dec_snr_db}")
        object.__setattr__(self, "dec_snr_db", (lo, hi))
        object.__setattr__(self, "arch", ArchConfig.from_dict(self.arch).to_dict())

    @property
    def arch_config(self) -> ArchConfig:
        arch = ArchConfig.from_dict(self.arch)
        if self.variant == "ff_ae" and arch.block_length is None:
            arch = dataclasses.replace(arch, block_length=self.K)
        return arch

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["dec_snr_db"] = list(self.dec_snr_db)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown training key(s): {', '.join(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class StepRecord:
    """One optimizer step. ``L`` uses the weights in force during the step;
    ``alpha``/``beta`` are the weights after the update that followed it."""

    epoch: int
    phase: str
    step: int
    L1: float
    L2: float
    L: float
    alpha: float
    beta: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    wall_clock: float = 0.0
    checkpoints: list = field(default_factory=list)
    validation: list = field(default_factory=list)

    def epoch_mean_loss(self, epoch: int) -> float:
        values = [r.L for r in self.records if r.epoch == epoch]
        if not values:
            raise ValueError(f"no records for epoch {epoch}")
        return float(np.mean(values))

    def steps_per_phase(self, epoch: int) -> dict:
        return {ph: sum(1 for r in self.records if r.epoch == epoch and r.phase == ph) for ph in PHASES}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRAINLOG_HEADER)
        for r in self.records:
            writer.writerow([r.epoch, r.phase, r.step, repr(r.L1), repr(r.L2), repr(r.L), repr(r.alpha), repr(r.beta)])
        return buf.getvalue()

    def summary(self) -> dict:
        epochs = sorted({r.epoch for r in self.records})
        return {
            "steps": len(self.records),
            "epochs": len(epochs),
            "epoch_mean_loss": [self.epoch_mean_loss(e) for e in epochs],
            "validation": self.validation,
            "wall_clock_s": self.wall_clock,
        }


@dataclass
class TrainState:
    """Mutable optimizer-side state carried from epoch to epoch."""

    alpha: float
    enc_opt: AdamState
    dec_opt: AdamState
    step: int = 0


@dataclass
class TrainResult:
    best: AutoencoderModel
    last: AutoencoderModel
    history: TrainHistory
    best_epoch: int
    best_ber: float


# -- losses --------------------------------------------------------------------------


def _forward(model, b1, b2, z1, z2, h):
    c1, s1 = model.encode(1, b1, mode="batch")
    c2, s2 = model.encode(2, b2, mode="batch")
    y1, y2 = transmit(c1, c2, ChannelParams(h, 0.0), noise=(z1, z2))
    L1 = bce_with_logits(model.decode_logits(1, y1), Tensor(b1))
    L2 = bce_with_logits(model.decode_logits(2, y2), Tensor(b2))
    return L1, L2, (s1, s2)


def compute_losses(model, b1, b2, z1, z2, h: float):
    """Per-user BCE losses for one batch with batch power normalization.

    ``model`` needs ``encode(user, bits, mode)`` and ``decode_logits(user, y)``;
    ``z1``, ``z2`` are the noise realizations, shaped like the codewords.
    Raises :class:`~deepic.ndgrad.NonFiniteError` on a non-finite loss.
    """
    L1, L2, _ = _forward(model, b1, b2, z1, z2, h)
    return L1, L2


def weighted_gradients(model: AutoencoderModel, L1: Tensor, L2: Tensor, alpha: float, names) -> list:
    """Gradients of ``alpha * L1 + (1 - alpha) * L2`` for the named parameters."""
    params = [model.params[n] for n in names]
    for p in params:
        p.grad = None
    (alpha * L1 + (1.0 - alpha) * L2).backward()
    return [p.grad for p in params]


@contextlib.contextmanager
def _trainable(model: AutoencoderModel, names):
    """Only ``names`` require grad inside the block, so frozen weights build no gradient."""
    wanted = set(names)
    saved = {n: p.requires_grad for n, p in model.params.items()}
    for n, p in model.params.items():
        p.requires_grad = n in wanted
    try:
        yield
    finally:
        for n, p in model.params.items():
            p.requires_grad = saved[n]
            p.grad = None


def step_stream(seed: int, epoch: int, phase: str, step: int) -> SeededRng:
    """Stream for the messages and noise of one training step."""
    return SeededRng(seed, f"train/epoch{epoch}/{phase}/step{step}")


def _batch(cfg: TrainConfig, phase: str, rng: SeededRng):
    J, K = cfg.batch_size, cfg.K
    b1 = rng.child("bits/u1").bits((J, K))
    b2 = rng.child("bits/u2").bits((J, K))
    if phase == "enc":
        snr = cfg.enc_snr_db
    else:
        snr = rng.child("snr").uniform_range(*cfg.dec_snr_db)
    params = ChannelParams.from_snr(cfg.h, snr, cfg.noise_correlation)
    z1, z2 = draw_noise(rng.child("noise"), (J, 3, K), params)
    return b1, b2, z1, z2


def train_epoch(model: AutoencoderModel, cfg: TrainConfig, epoch: int, state: TrainState):
    """Run one encoder phase and one decoder phase.

    Returns the step records and the EMA of the normalization statistics seen
    during the decoder phase (encoders are fixed then, so these are the
    statistics the frozen model should use).
    """
    records = []
    ema: dict[int, BatchStats] = {}
    sums = np.zeros(2)
    decay = model.arch.ema_decay
    for phase in PHASES:
        names = model.encoder_param_names() if phase == "enc" else model.decoder_param_names()
        opt = state.enc_opt if phase == "enc" else state.dec_opt
        steps = cfg.enc_steps if phase == "enc" else cfg.dec_steps
        with _trainable(model, names):
            params = [model.params[n] for n in names]
            for s in range(steps):
                rng = step_stream(cfg.seed, epoch, phase, s)
                b1, b2, z1, z2 = _batch(cfg, phase, rng)
                L1, L2, stats = _forward(model, b1, b2, z1, z2, cfg.h)
                l1, l2 = L1.item(), L2.item()
                alpha = state.alpha
                loss = alpha * l1 + (1.0 - alpha) * l2
                grads = weighted_gradients(model, L1, L2, alpha, names)
                if cfg.grad_clip is not None:
                    grads, _ = clip_grad_norm(grads, cfg.grad_clip)
                adam_step(params, grads, opt)
                if cfg.alpha_update == "step":
                    state.alpha = l1 / (l1 + l2)
                sums += (l1, l2)
                if phase == "dec":
                    for user, st in zip((1, 2), stats):
                        ema[user] = st if user not in ema else ema[user].ema(st, decay)
                records.append(StepRecord(epoch, phase, state.step, l1, l2, loss, state.alpha, 1.0 - state.alpha))
                state.step += 1
    if cfg.alpha_update == "epoch":
        state.alpha = float(sums[0] / sums.sum())
    return records, ema


def validate(model: AutoencoderModel, snr_db: float, h: float, blocks: int, rng: SeededRng, K: int = 100) -> BerPoint:
    """Per-user BER of ``model`` (frozen statistics) over exactly ``blocks`` blocks of length ``K``.

    The result carries ``ber_user1``, ``ber_user2`` and the block and
    bit-error counts behind them.
    """
    stop = StoppingRule(min_errors=1 << 62, max_blocks=blocks, batch_blocks=min(blocks, 500))
    return estimate_ber(NeuralScheme(model, K), ChannelParams.from_snr(h, snr_db), K, stop, rng, model.kind)


def train(cfg: TrainConfig, out_dir=None, model: AutoencoderModel | None = None) -> TrainResult:
    """Train from scratch (or from ``model``) and pick the best epoch by validation BER.

    With ``out_dir`` a checkpoint is written after every epoch as
    ``epoch_NNN.json``. A non-finite loss raises :class:`TrainingDiverged`
    holding the checkpoint from the end of the previous epoch.
    """
    dtype = np.float32 if cfg.dtype == "float32" else np.float64
    out = Path(out_dir) if out_dir is not None else None
    started = time.perf_counter()
    with precision(dtype):
        if model is None:
            model = build_variant(cfg.variant, cfg.arch_config, cfg.seed)
        model.astype(dtype)
        state = TrainState(cfg.alpha, AdamState(lr=cfg.lr), AdamState(lr=cfg.lr))
        history = TrainHistory()
        last_good, last_path = model.copy(), None
        best, best_epoch, best_ber = None, -1, math.inf
        for epoch in range(cfg.epochs):
            try:
                records, ema = train_epoch(model, cfg, epoch, state)
            except NonFiniteError as exc:
                raise TrainingDiverged(f"non-finite value in epoch {epoch}: {exc}", last_good, last_path) from exc
            history.records.extend(records)
            model.frozen_stats = ema
            point = validate(model, cfg.val_snr_db, cfg.h, cfg.val_blocks, SeededRng(cfg.seed, "validation"), cfg.K)
            history.validation.append({"epoch": epoch, "ber_user1": point.ber_user1, "ber_user2": point.ber_user2})
            log.info("epoch %d: mean loss %.4f, validation BER %.4g", epoch, history.epoch_mean_loss(epoch), point.ber_avg)
            last_good = model.copy()
            if out is not None:
                last_path = checkpoint.save(model, out / f"epoch_{epoch:03d}.json")
                history.checkpoints.append(last_path.name)
            if point.ber_avg < best_ber:
                best, best_epoch, best_ber = last_good, epoch, point.ber_avg
        history.wall_clock = time.perf_counter() - started
    return TrainResult(best=best, last=last_good, history=history, best_epoch=best_epoch, best_ber=best_ber)
