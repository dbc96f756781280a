from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AutoencoderModel

DEFAULT_TAU = 0.05


@dataclass
class PerturbationResponse:
    """Codeword change caused by flipping a single message bit.

    ``delta`` has length 3K laid out branch by branch; ``support`` counts, per
    branch, the positions where ``|delta| > tau``.
    """

    K: int
    position: int
    tau: float
    delta: np.ndarray
    support: list[int]
    peaks: list[int]

    def branch(self, i: int) -> np.ndarray:
        return self.delta[i * self.K : (i + 1) * self.K]


def perturbation_response(
    model: AutoencoderModel, K: int, user: int = 1, tau: float = DEFAULT_TAU, position: int | None = None
) -> PerturbationResponse:
    """``c(b*) - c(0)`` in frozen-statistics mode, where ``b*`` has a single 1.

    By default the 1 sits at the middle bit ``K // 2``.
    """
    if K < 3:
        raise ValueError(f"perturbation analysis needs K >= 3, got {K}")
    position = K // 2 if position is None else int(position)
    if not 0 <= position < K:
        raise ValueError(f"position {position} outside block of length {K}")
    zeros = np.zeros((1, K), dtype=np.int8)
    single = zeros.copy()
    single[0, position] = 1
    c_zero, _ = model.encode(user, zeros, mode="frozen")
    c_one, _ = model.encode(user, single, mode="frozen")
    delta = (c_one.data - c_zero.data).reshape(3 * K).astype(np.float64)
    per_branch = delta.reshape(3, K)
    support = [int(np.count_nonzero(np.abs(row) > tau)) for row in per_branch]
    peaks = [int(np.argmax(np.abs(row))) for row in per_branch]
    return PerturbationResponse(K, position, tau, delta, support, peaks)
