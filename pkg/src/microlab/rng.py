"""Counter-based random streams.

Every stochastic routine takes an integer seed and an optional stream path.
Streams are derived with ``SeedSequence`` spawn keys feeding a Philox
bit generator, so sub-streams are independent and reproducible regardless
of how many draws other streams consume.
"""
from __future__ import annotations

import numpy as np

ALGORITHM = "numpy.Philox4x64-10/SeedSequence"


def stream(seed: int, *path: int) -> np.random.Generator:
    """Generator for ``seed`` on the sub-stream identified by ``path``."""
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def split(seed: int, n: int, *path: int) -> list[np.random.Generator]:
    """``n`` independent generators below ``path``."""
    return [stream(seed, *path, i) for i in range(n)]
