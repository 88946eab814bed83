"""Seeded, splittable random streams on top of numpy's SeedSequence."""
from __future__ import annotations

import numpy as np


class Rng:
    """A reproducible random stream.

    ``split`` derives two child streams from the seed tree without consuming
    draws from the parent, so the order of sibling usage never matters.
    """

    def __init__(self, seed: int | np.random.SeedSequence = 0):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    @property
    def seed(self) -> int:
        return int(self._seq.entropy)

    @property
    def counter(self) -> int:
        return self._seq.n_children_spawned

    def split(self, n: int = 2) -> list["Rng"]:
        return [Rng(s) for s in self._seq.spawn(n)]

    def child(self) -> "Rng":
        return self.split(1)[0]

    def normal(self, size=None, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def random(self, size=None):
        return self._gen.random(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def choice(self, a, size=None, replace=True):
        return self._gen.choice(a, size=size, replace=replace)

    def permutation(self, n):
        return self._gen.permutation(n)

    def seed_int(self) -> int:
        """Draw a 63-bit integer, handy for seeding a derived stream later."""
        return int(self._gen.integers(0, 2**63 - 1))


def as_rng(rng: Rng | int | None, default: int = 0) -> Rng:
    if isinstance(rng, Rng):
        return rng
    return Rng(default if rng is None else rng)
