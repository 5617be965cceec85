"""Counter-based random streams for reproducible parallel Monte Carlo.

Every shot of every experiment draws from its own Philox stream keyed by
``(master seed, shot index)``.  Streams are independent of batch size, worker
count, and execution order, so re-running with a different ``--threads`` value
reproduces results bit for bit.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def shot_stream(seed: int, shot: int) -> np.random.Generator:
    """Independent generator for one (seed, shot) pair."""
    key = np.array([seed & _MASK64, shot & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def shot_uniforms(seed: int, shots: range, draws: int) -> np.ndarray:
    """Uniform block, one row per shot, ``draws`` values each.

    Row ``i`` depends only on ``(seed, shots[i])``, never on the other rows,
    so any partition of a shot range yields the same per-shot values.
    """
    out = np.empty((len(shots), draws), dtype=np.float64)
    for i, shot in enumerate(shots):
        out[i] = shot_stream(seed, shot).random(draws)
    return out
