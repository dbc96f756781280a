"""Binary convolutional codes: trellis tables, encoding and Viterbi decoding.

Generator polynomials are written in octal as is customary, e.g. ``(13, 15)``.
The most significant tap multiplies the current register bit and the least
significant one the oldest (delay ``m``).

For a recursive code the first generator is the feedback polynomial and the
corresponding output is the systematic bit; the remaining generators produce
parity bits. A feedforward code emits one output per generator. Either way
the rate is ``1 / len(generators)``.

Bits are mapped to channel symbols as ``x = 2c - 1``; log-likelihood ratios
use ``L = log P(c=1) / P(c=0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def octal(g) -> int:
    """Interpret ``g`` (int or str) as octal digits: ``octal(13) == 0b1011``."""
    return int(str(g), 8)


def _taps(poly: int, m: int) -> list[int]:
    return [(poly >> (m - i)) & 1 for i in range(m + 1)]


@dataclass(frozen=True)
class ConvCode:
    """Rate-1/n binary convolutional code described by octal generators."""

    generators: tuple
    recursive: bool = False
    terminated: bool = True
    memory: int = field(init=False)

    def __post_init__(self):
        gens = tuple(octal(g) for g in self.generators)
        if not gens or any(g <= 0 for g in gens):
            raise ValueError("generators must be non-empty and nonzero")
        m = max(g.bit_length() for g in gens) - 1
        if m < 1:
            raise ValueError("code needs memory >= 1")
        if self.recursive and not (gens[0] >> m) & 1:
            raise ValueError("feedback polynomial must tap the current bit")
        object.__setattr__(self, "memory", m)
        object.__setattr__(self, "_polys", gens)
        self._build_trellis()

    # -- trellis -------------------------------------------------------------
    def _build_trellis(self) -> None:
        m = self.memory
        S = 1 << m
        n = len(self._polys)
        next_state = np.zeros((S, 2), dtype=np.intp)
        outputs = np.zeros((S, 2, n), dtype=np.int8)
        tail_input = np.zeros(S, dtype=np.int8)
        taps = [_taps(g, m) for g in self._polys]
        for s in range(S):
            past = [(s >> (m - i)) & 1 for i in range(1, m + 1)]  # delays 1..m
            if self.recursive:
                fb = taps[0]
                feedback = 0
                for i in range(1, m + 1):
                    feedback ^= fb[i] & past[i - 1]
                tail_input[s] = feedback
            for u in (0, 1):
                if self.recursive:
                    a = u ^ int(tail_input[s])
                    reg = [a] + past
                    outs = [u] + [sum(t[i] & reg[i] for i in range(m + 1)) & 1 for t in taps[1:]]
                else:
                    reg = [u] + past
                    outs = [sum(t[i] & reg[i] for i in range(m + 1)) & 1 for t in taps]
                next_state[s, u] = (s >> 1) | (reg[0] << (m - 1))
                outputs[s, u] = outs
        object.__setattr__(self, "next_state", next_state)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "tail_input", tail_input)
        # every state has exactly two incoming branches; sort by predecessor index
        pred = [[] for _ in range(S)]
        for s in range(S):
            for u in (0, 1):
                pred[next_state[s, u]].append((s, u))
        pred = [sorted(p) for p in pred]
        object.__setattr__(self, "pred_state", np.array([[p[0][0], p[1][0]] for p in pred], dtype=np.intp))
        object.__setattr__(self, "pred_input", np.array([[p[0][1], p[1][1]] for p in pred], dtype=np.intp))

    @property
    def n_states(self) -> int:
        return 1 << self.memory

    @property
    def n_out(self) -> int:
        return len(self._polys)

    @property
    def rate(self) -> float:
        return 1.0 / self.n_out

    @property
    def systematic(self) -> bool:
        return self.recursive or any(g == 1 << self.memory for g in self._polys)

    def tail_length(self) -> int:
        return self.memory if self.terminated else 0

    def coded_length(self, K: int) -> int:
        return self.n_out * (K + self.tail_length())


def conv_encode(code: ConvCode, bits) -> np.ndarray:
    """Encode ``bits`` (K,) or (N, K); outputs are interleaved per time step.

    Returns shape (..., n * (K + tail)). For terminated codes the tail drives
    the encoder back to state 0 (zeros for feedforward codes, feedback bits
    for recursive ones).
    """
    bits = np.asarray(bits, dtype=np.int8)
    single = bits.ndim == 1
    if single:
        bits = bits[None]
    N, K = bits.shape
    T = K + code.tail_length()
    out = np.zeros((N, T, code.n_out), dtype=np.int8)
    state = np.zeros(N, dtype=np.intp)
    for t in range(T):
        u = bits[:, t] if t < K else code.tail_input[state]
        out[:, t] = code.outputs[state, u]
        state = code.next_state[state, u]
    out = out.reshape(N, T * code.n_out)
    return out[0] if single else out


def final_state(code: ConvCode, bits) -> np.ndarray:
    bits = np.atleast_2d(np.asarray(bits, dtype=np.int8))
    state = np.zeros(bits.shape[0], dtype=np.intp)
    for t in range(bits.shape[1]):
        state = code.next_state[state, bits[:, t]]
    return state


def viterbi_decode(code: ConvCode, received, noise_var: float = 1.0, llr: bool = False) -> np.ndarray:
    """Maximum-likelihood sequence decoding.

    ``received`` holds real channel symbols (BPSK ``x = 2c - 1`` plus noise)
    laid out like :func:`conv_encode` output, or LLRs when ``llr=True``. The
    branch metric is the squared Euclidean distance (or ``-sum c L`` for
    LLRs). Equal metrics resolve to the lower-indexed predecessor state, and
    for open trellises to the lowest-indexed final state. ``noise_var`` only
    scales metrics and so does not change decisions.
    """
    r = np.asarray(received, dtype=np.float64)
    single = r.ndim == 1
    if single:
        r = r[None]
    N, L = r.shape
    n = code.n_out
    if L % n:
        raise ValueError(f"received length {L} is not a multiple of 1/rate = {n}")
    T = L // n
    K = T - code.tail_length()
    if K < 0:
        raise ValueError("received sequence shorter than the code tail")
    r = r.reshape(N, T, n)
    S = code.n_states
    symbols = 2.0 * code.outputs.astype(np.float64) - 1.0  # (S, 2, n)
    bits = code.outputs.astype(np.float64)

    inf = np.inf
    metric = np.full((N, S), inf)
    metric[:, 0] = 0.0
    choices = np.zeros((T, N, S), dtype=np.int8)
    ps, pu = code.pred_state, code.pred_input  # (S, 2)
    for t in range(T):
        if llr:
            bm = -np.einsum("nj,suj->nsu", r[:, t], bits)
        else:
            diff = r[:, t, None, None, :] - symbols[None]
            bm = np.einsum("nsuj,nsuj->nsu", diff, diff) / (2.0 * noise_var)
        if t >= K:
            # tail steps follow the forced input from each state
            forced = np.full((S, 2), inf)
            forced[np.arange(S), code.tail_input] = 0.0
            bm = bm + forced[None]
        cand = metric[:, ps] + bm[:, ps, pu]  # (N, S, 2)
        choice = np.argmin(cand, axis=2)
        choices[t] = choice
        metric = np.take_along_axis(cand, choice[..., None], axis=2)[..., 0]

    if code.terminated:
        state = np.zeros(N, dtype=np.intp)
    else:
        state = np.argmin(metric, axis=1)
    decoded = np.zeros((N, T), dtype=np.int8)
    rows = np.arange(N)
    for t in range(T - 1, -1, -1):
        c = choices[t, rows, state]
        decoded[:, t] = pu[state, c]
        state = ps[state, c]
    decoded = decoded[:, :K]
    return decoded[0] if single else decoded
