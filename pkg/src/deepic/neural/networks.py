"""Per-variant network definitions.

Each network declares its parameter shapes for one user and builds the
encoder (bits in {-1, +1} -> pre-normalization symbols (J, 3, K)) and decoder
(received streams (J, 3, K) -> logits (J, K)) graphs from a parameter dict.
Parameter names are prefixed ``u{user}.`` so both users live in one dict
without sharing weights.
"""

from __future__ import annotations

import numpy as np

from ..ndgrad import Tensor, activation, concat, conv1d, dense, gru_cell, stack, take
from .config import ArchConfig
from .interleaver import Interleaver

# name -> (shape, fan_in)
ShapeTable = dict[str, tuple[tuple[int, ...], int]]


def _conv_shapes(table: ShapeTable, prefix: str, c_in: int, c_out: int, width: int) -> None:
    table[f"{prefix}.w"] = ((c_out, c_in, width), c_in * width)
    table[f"{prefix}.b"] = ((c_out,), c_in * width)


def _dense_shapes(table: ShapeTable, prefix: str, d_in: int, d_out: int) -> None:
    table[f"{prefix}.w"] = ((d_out, d_in), d_in)
    table[f"{prefix}.b"] = ((d_out,), d_in)


def _conv_stack_shapes(table, prefix, c_in, hidden, c_out, width, layers) -> None:
    for i in range(layers):
        _conv_shapes(table, f"{prefix}.conv{i}", c_in if i == 0 else hidden, hidden, width)
    _conv_shapes(table, f"{prefix}.out", hidden, c_out, 1)


def _conv_stack(params, prefix, x, layers, act):
    for i in range(layers):
        x = act(conv1d(x, params[f"{prefix}.conv{i}.w"], params[f"{prefix}.conv{i}.b"]))
    return conv1d(x, params[f"{prefix}.out.w"], params[f"{prefix}.out.b"])


class Network:
    """Base class; subclasses fill in shapes and the two graph builders."""

    def __init__(self, arch: ArchConfig):
        self.arch = arch
        self.act = activation(arch.activation)

    def encoder_shapes(self, user: int) -> ShapeTable:
        raise NotImplementedError

    def decoder_shapes(self, user: int) -> ShapeTable:
        raise NotImplementedError

    def encode_raw(self, params, user: int, x: Tensor) -> Tensor:
        raise NotImplementedError

    def decode_logits(self, params, user: int, y: Tensor) -> Tensor:
        raise NotImplementedError

    def check_length(self, K: int) -> None:
        """Raise if this network cannot process blocks of length ``K``."""


class DeepICNet(Network):
    """Three parallel CNN branches and an iterative two-block CNN decoder."""

    def __init__(self, arch: ArchConfig, interleaved: bool = False):
        super().__init__(arch)
        self.interleaved = interleaved
        self._interleavers: dict[int, Interleaver] = {}

    def interleaver(self, K: int) -> Interleaver:
        if K not in self._interleavers:
            self._interleavers[K] = Interleaver.from_seed(K, self.arch.interleaver_seed)
        return self._interleavers[K]

    def encoder_shapes(self, user):
        a = self.arch
        table: ShapeTable = {}
        for branch in (1, 2, 3):
            _conv_stack_shapes(table, f"u{user}.enc.b{branch}", 1, a.enc_channels, 1, a.enc_kernel, a.enc_layers)
        return table

    def _block_names(self, user: int) -> list[tuple[str, str]]:
        a = self.arch
        if a.shared_iteration_weights:
            return [(f"u{user}.dec.phi1", f"u{user}.dec.phi2")] * a.iterations
        return [(f"u{user}.dec.it{t}.phi1", f"u{user}.dec.it{t}.phi2") for t in range(a.iterations)]

    def decoder_shapes(self, user):
        a = self.arch
        table: ShapeTable = {}
        c_in = 2 + a.feature_size
        for names in dict.fromkeys(self._block_names(user)):
            for name in names:
                _conv_stack_shapes(table, name, c_in, a.dec_channels, a.feature_size, a.dec_kernel, a.dec_layers)
        _conv_shapes(table, f"u{user}.dec.head", a.feature_size, 1, 1)
        return table

    def encode_raw(self, params, user, x, interleaver: Interleaver | None = None):
        """``x`` is (J, 1, K) in {-1, +1}; returns (J, 3, K)."""
        a = self.arch
        if interleaver is None and self.interleaved:
            interleaver = self.interleaver(x.shape[2])
        outs = []
        for branch in (1, 2, 3):
            inp = x
            if branch == 3 and interleaver is not None:
                inp = take(x, interleaver.perm, axis=2)
            outs.append(_conv_stack(params, f"u{user}.enc.b{branch}", inp, a.enc_layers, self.act))
        return concat(outs, axis=1)

    def decode_logits(self, params, user, y, interleaver: Interleaver | None = None):
        a = self.arch
        J, _, K = y.shape
        if interleaver is None and self.interleaved:
            interleaver = self.interleaver(K)
        y1, y2, y3 = y[:, 0:1, :], y[:, 1:2, :], y[:, 2:3, :]
        y1_second = y1
        if interleaver is not None and a.interleave_y1:
            y1_second = take(y1, interleaver.perm, axis=2)
        prior = Tensor(np.zeros((J, a.feature_size, K)))
        q2 = prior
        for phi1, phi2 in self._block_names(user):
            q1 = _conv_stack(params, phi1, concat([y1, y2, prior], axis=1), a.dec_layers, self.act)
            if interleaver is not None:
                q1 = take(q1, interleaver.perm, axis=2)
            q2 = _conv_stack(params, phi2, concat([y1_second, y3, q1], axis=1), a.dec_layers, self.act)
            if interleaver is not None:
                q2 = take(q2, interleaver.inverse, axis=2)
            prior = q2
        logits = conv1d(q2, params[f"u{user}.dec.head.w"], params[f"u{user}.dec.head.b"])
        return logits.reshape(J, K)


class CNNAENet(Network):
    """A single CNN producing all three streams and a plain CNN decoder."""

    def encoder_shapes(self, user):
        a = self.arch
        table: ShapeTable = {}
        _conv_stack_shapes(table, f"u{user}.enc", 1, a.enc_channels, 3, a.enc_kernel, a.enc_layers)
        return table

    def decoder_shapes(self, user):
        a = self.arch
        table: ShapeTable = {}
        _conv_stack_shapes(table, f"u{user}.dec", 3, a.dec_channels, 1, a.dec_kernel, a.dec_layers)
        return table

    def encode_raw(self, params, user, x):
        return _conv_stack(params, f"u{user}.enc", x, self.arch.enc_layers, self.act)

    def decode_logits(self, params, user, y):
        J, _, K = y.shape
        return _conv_stack(params, f"u{user}.dec", y, self.arch.dec_layers, self.act).reshape(J, K)


def _gru_shapes(table: ShapeTable, prefix: str, d_in: int, hidden: int) -> None:
    for d in ("fwd", "bwd"):
        table[f"{prefix}.{d}.w_ih"] = ((3 * hidden, d_in), hidden)
        table[f"{prefix}.{d}.w_hh"] = ((3 * hidden, hidden), hidden)
        table[f"{prefix}.{d}.b_ih"] = ((3 * hidden,), hidden)
        table[f"{prefix}.{d}.b_hh"] = ((3 * hidden,), hidden)


def _bigru(params, prefix: str, seq: list[Tensor], hidden: int) -> list[Tensor]:
    J = seq[0].shape[0]
    outputs = []
    for direction, order in (("fwd", range(len(seq))), ("bwd", reversed(range(len(seq))))):
        cell = {k: params[f"{prefix}.{direction}.{k}"] for k in ("w_ih", "w_hh", "b_ih", "b_hh")}
        h = Tensor(np.zeros((J, hidden)))
        states: list[Tensor | None] = [None] * len(seq)
        for t in order:
            h = gru_cell(seq[t], h, cell)
            states[t] = h
        outputs.append(states)
    return [concat([f, b], axis=1) for f, b in zip(*outputs)]


class RNNAENet(Network):
    """Bidirectional GRU encoder and decoder with per-position dense heads."""

    def _rnn_shapes(self, prefix: str, d_in: int, d_out: int) -> ShapeTable:
        a = self.arch
        table: ShapeTable = {}
        for layer in range(a.rnn_layers):
            _gru_shapes(table, f"{prefix}.gru{layer}", d_in if layer == 0 else 2 * a.rnn_hidden, a.rnn_hidden)
        _dense_shapes(table, f"{prefix}.head", 2 * a.rnn_hidden, d_out)
        return table

    def encoder_shapes(self, user):
        return self._rnn_shapes(f"u{user}.enc", 1, 3)

    def decoder_shapes(self, user):
        return self._rnn_shapes(f"u{user}.dec", 3, 1)

    def _run(self, params, prefix: str, x: Tensor, d_out: int) -> Tensor:
        """``x`` is (J, D, K); returns (J, d_out, K)."""
        a = self.arch
        J, _, K = x.shape
        seq = [x[:, :, t] for t in range(K)]
        for layer in range(a.rnn_layers):
            seq = _bigru(params, f"{prefix}.gru{layer}", seq, a.rnn_hidden)
        flat = stack(seq, axis=1).reshape(J * K, 2 * a.rnn_hidden)
        out = dense(flat, params[f"{prefix}.head.w"], params[f"{prefix}.head.b"])
        return out.reshape(J, K, d_out).transpose(0, 2, 1)

    def encode_raw(self, params, user, x):
        return self._run(params, f"u{user}.enc", x, 3)

    def decode_logits(self, params, user, y):
        J, _, K = y.shape
        return self._run(params, f"u{user}.dec", y, 1).reshape(J, K)


class FFAENet(Network):
    """Fully connected layers over the whole block (fixed block length)."""

    def __init__(self, arch: ArchConfig):
        super().__init__(arch)
        if arch.block_length is None:
            raise ValueError("ff_ae needs arch.block_length because its layers span the whole block")
        self.K = arch.block_length

    def check_length(self, K):
        if K != self.K:
            raise ValueError(f"ff_ae was built for K={self.K}, got K={K}")

    def _mlp_shapes(self, prefix: str, d_in: int, d_out: int) -> ShapeTable:
        a = self.arch
        table: ShapeTable = {}
        for i in range(a.ff_layers):
            _dense_shapes(table, f"{prefix}.fc{i}", d_in if i == 0 else a.ff_hidden, a.ff_hidden)
        _dense_shapes(table, f"{prefix}.out", a.ff_hidden, d_out)
        return table

    def _mlp(self, params, prefix: str, x: Tensor) -> Tensor:
        for i in range(self.arch.ff_layers):
            x = self.act(dense(x, params[f"{prefix}.fc{i}.w"], params[f"{prefix}.fc{i}.b"]))
        return dense(x, params[f"{prefix}.out.w"], params[f"{prefix}.out.b"])

    def encoder_shapes(self, user):
        return self._mlp_shapes(f"u{user}.enc", self.K, 3 * self.K)

    def decoder_shapes(self, user):
        return self._mlp_shapes(f"u{user}.dec", 3 * self.K, self.K)

    def encode_raw(self, params, user, x):
        J, _, K = x.shape
        self.check_length(K)
        return self._mlp(params, f"u{user}.enc", x.reshape(J, K)).reshape(J, 3, K)

    def decode_logits(self, params, user, y):
        J, _, K = y.shape
        self.check_length(K)
        return self._mlp(params, f"u{user}.dec", y.reshape(J, 3 * K))


def make_network(kind: str, arch: ArchConfig) -> Network:
    if kind == "deepic":
        return DeepICNet(arch)
    if kind == "deepic_interleaved":
        return DeepICNet(arch, interleaved=True)
    if kind == "cnn_ae":
        return CNNAENet(arch)
    if kind == "rnn_ae":
        return RNNAENet(arch)
    if kind == "ff_ae":
        return FFAENet(arch)
    raise ValueError(f"unknown variant kind {kind!r}")
