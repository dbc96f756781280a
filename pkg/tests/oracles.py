"""Independent reference implementations used as test oracles.

Nothing here shares code with the package: encoders are plain shift
registers and decoders enumerate every message.
"""

import itertools
import math

import numpy as np


def q_function(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def _taps(g, m):
    digits = bin(int(str(g), 8))[2:].zfill(m + 1)
    return [int(d) for d in digits]  # taps[0] multiplies the newest register bit


def shift_register_encode(generators, bits, recursive=False, terminate=True):
    """Encode with an explicit register list; outputs interleaved per step."""
    m = max(int(str(g), 8).bit_length() for g in generators) - 1
    taps = [_taps(g, m) for g in generators]
    reg = [0] * m  # reg[0] is delay 1
    out = []

    def feedback():
        return sum(t & r for t, r in zip(taps[0][1:], reg)) % 2

    steps = list(bits)
    for i in range(len(steps) + (m if terminate else 0)):
        if i < len(steps):
            u = int(steps[i])
        else:
            u = feedback() if recursive else 0
        if recursive:
            a = (u + feedback()) % 2
            window = [a] + reg
            out.append(u)
            for t in taps[1:]:
                out.append(sum(x & y for x, y in zip(t, window)) % 2)
        else:
            window = [u] + reg
            for t in taps:
                out.append(sum(x & y for x, y in zip(t, window)) % 2)
        reg = window[:m]
    return np.array(out, dtype=np.int8)


def all_messages(K):
    return np.array(list(itertools.product((0, 1), repeat=K)), dtype=np.int8)


def codebook(generators, K, recursive=False, terminate=True):
    msgs = all_messages(K)
    return msgs, np.array([shift_register_encode(generators, m, recursive, terminate) for m in msgs])


def brute_force_ml(book_msgs, book_codes, received):
    """Messages minimizing squared distance between BPSK codewords and ``received`` (N, n)."""
    x = 2.0 * book_codes - 1.0
    dist = (received**2).sum(1)[:, None] - 2.0 * received @ x.T + (x**2).sum(1)[None, :]
    return book_msgs[np.argmin(dist, axis=1)]


def brute_force_map(book_msgs, book_codes, channel_llrs, prior_llrs):
    """Exact posterior LLRs of every message bit by enumeration.

    P(codeword) is proportional to exp(sum_j c_j L_j + sum_k b_k La_k).
    """
    logp = channel_llrs @ book_codes.T.astype(float) + prior_llrs @ book_msgs.T.astype(float)  # (N, M)
    out = np.zeros(prior_llrs.shape)
    for k in range(book_msgs.shape[1]):
        ones = book_msgs[:, k] == 1
        out[:, k] = np.logaddexp.reduce(logp[:, ones], axis=1) - np.logaddexp.reduce(logp[:, ~ones], axis=1)
    return out


def block_level_agree(a, b, K, z=3.0):
    """Whether two BER estimates agree within ``z`` block-level standard errors.

    ``a`` and ``b`` are per-block error counts (1-D); blocks are the
    independent units, so bursts of errors inside a block are accounted for.
    """
    ra, rb = np.asarray(a, float) / K, np.asarray(b, float) / K
    se = math.sqrt(ra.var(ddof=1) / ra.size + rb.var(ddof=1) / rb.size)
    return abs(ra.mean() - rb.mean()) <= z * se
