"""Reproducible per-stream random sources.

Every pattern of a bag gets its own stream keyed by ``(seed, ordinal)``, so a
bag is the same however its patterns are scheduled across workers.
"""

from __future__ import annotations

import numpy as np


class RandomSource:
    """Uniform and standard-normal draws from stream ``stream`` of ``seed``."""

    __slots__ = ("seed", "stream", "_gen")

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed & (2**64 - 1), spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def uniform(self) -> float:
        return float(self._gen.random())

    def standard_normal(self, n: int, out: np.ndarray | None = None) -> np.ndarray:
        if out is not None:
            return self._gen.standard_normal(out=out)
        return self._gen.standard_normal(n)
