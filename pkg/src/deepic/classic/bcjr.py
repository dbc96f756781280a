"""Log-domain BCJR (forward-backward) symbol-MAP decoding."""

from __future__ import annotations

import numpy as np

from .convcode import ConvCode

_NEG_INF = -np.inf


def _lse(a: np.ndarray, axis: int) -> np.ndarray:
    """log-sum-exp that tolerates all -inf slices."""
    m = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - safe), axis=axis, keepdims=True)) + safe
    return np.squeeze(out, axis=axis)


def bcjr_decode(code: ConvCode, channel_llrs, prior_llrs=None) -> tuple[np.ndarray, np.ndarray]:
    """Exact a-posteriori LLRs of the input bits of one constituent code.

    Parameters
    ----------
    code : ConvCode
        Trellis to decode. Terminated codes end in state 0; open codes have a
        uniform final-state distribution.
    channel_llrs : array (N, T, n) or (N, T * n)
        LLRs ``log P(c=1)/P(c=0)`` of every coded bit, including tail steps.
    prior_llrs : array (N, K), optional
        A-priori LLRs of the K message bits (zeros if omitted).

    Returns
    -------
    posterior, extrinsic : arrays (N, K)
        ``extrinsic = posterior - prior`` minus the systematic channel LLR
        when the code is systematic (output 0 is then the input bit).
    """
    lc = np.asarray(channel_llrs, dtype=np.float64)
    n = code.n_out
    if lc.ndim == 2:
        if lc.shape[1] % n:
            raise ValueError(f"channel LLR length {lc.shape[1]} is not a multiple of {n}")
        lc = lc.reshape(lc.shape[0], -1, n)
    if lc.ndim != 3 or lc.shape[2] != n:
        raise ValueError(f"channel LLRs must be (N, T, {n}), got {lc.shape}")
    if not np.all(np.isfinite(lc)):
        raise ValueError("channel LLRs must be finite")
    N, T, _ = lc.shape
    K = T - code.tail_length()
    if prior_llrs is None:
        la = np.zeros((N, K))
    else:
        la = np.asarray(prior_llrs, dtype=np.float64)
        if la.shape != (N, K):
            raise ValueError(f"prior LLRs must be {(N, K)}, got {la.shape}")
        if not np.all(np.isfinite(la)):
            raise ValueError("prior LLRs must be finite")

    S = code.n_states
    out_bits = code.outputs.astype(np.float64)  # (S, 2, n)
    nxt = code.next_state  # (S, 2)
    u_val = np.array([0.0, 1.0])

    # branch log-metrics gamma[t, N, S, 2]
    gamma = np.einsum("ntj,suj->tnsu", lc, out_bits)
    gamma[:K] += la.T[:, :, None, None] * u_val[None, None, None, :]
    if T > K:
        forbid = np.zeros((S, 2))
        forbid[np.arange(S), 1 - code.tail_input] = _NEG_INF
        gamma[K:] += forbid[None, None]

    # scatter matrix: for each next state, the (state, input) branches entering it
    alpha = np.full((T + 1, N, S), _NEG_INF)
    alpha[0, :, 0] = 0.0
    ps, pu = code.pred_state, code.pred_input
    for t in range(T):
        cand = alpha[t][:, ps] + gamma[t][:, ps, pu]  # (N, S, 2)
        a = _lse(cand, axis=2)
        alpha[t + 1] = a - np.max(a, axis=1, keepdims=True)

    beta = np.full((T + 1, N, S), _NEG_INF)
    if code.terminated:
        beta[T, :, 0] = 0.0
    else:
        beta[T] = 0.0
    for t in range(T - 1, -1, -1):
        cand = gamma[t] + beta[t + 1][:, nxt]  # (N, S, 2)
        b = _lse(cand, axis=2)
        beta[t] = b - np.max(b, axis=1, keepdims=True)

    # joint branch metric for message steps
    joint = alpha[:K, :, :, None] + gamma[:K] + beta[1 : K + 1][:, :, nxt]  # (K, N, S, 2)
    l1 = _lse(joint[..., 1], axis=2)
    l0 = _lse(joint[..., 0], axis=2)
    posterior = (l1 - l0).T
    extrinsic = posterior - la
    if code.systematic and code.recursive:
        extrinsic = extrinsic - lc[:, :K, 0]
    return posterior, extrinsic
