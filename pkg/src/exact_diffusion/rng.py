"""Seed- and stream-addressed random number generation.

Every sampler in the package draws from an :class:`RngStream`, a thin wrapper
around a counter-based Philox generator keyed by ``(seed, stream_id)``.
Distinct key pairs give statistically independent streams; the same pair
reproduces the identical sequence bit for bit, which is what makes per-path
parallelism deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class RngStream:
    """A reproducible, independently addressable random stream.

    One stream must never be shared between threads; hand each worker its
    own ``(seed, stream_id)``.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.Philox(ss))

    @property
    def generator(self) -> np.random.Generator:
        """Underlying numpy generator, for vectorised bulk draws."""
        return self._gen

    def child(self, stream_id: int) -> "RngStream":
        """A fresh stream under the same seed with a different id."""
        return RngStream(self.seed, stream_id)

    def uniform(self) -> float:
        """One draw from U[0, 1)."""
        return float(self._gen.random())

    def uniform_positive(self) -> float:
        """One draw from U(0, 1); rejects the measure-zero 0.0."""
        while True:
            u = float(self._gen.random())
            if u > 0.0:
                return u

    def uniforms(self, n: int) -> np.ndarray:
        return self._gen.random(n)

    def standard_normal(self) -> float:
        return float(self._gen.standard_normal())

    def standard_normals(self, n: int) -> np.ndarray:
        return self._gen.standard_normal(n)

    def poisson(self, mean: float) -> int:
        return int(self._gen.poisson(mean))
