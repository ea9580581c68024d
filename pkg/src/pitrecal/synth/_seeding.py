"""Deterministic per-task random streams.

Task ``i`` of a run with master seed ``s`` draws from a Philox
counter-based generator keyed by ``(s, i)``. Streams are independent of
scheduling order, so parallel and serial generation agree.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def stream(seed: int, task: int = 0) -> np.random.Generator:
    key = np.array([int(seed) & MASK64, int(task) & MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
