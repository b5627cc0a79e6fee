"""Hierarchical, reproducible random streams.

A :class:`RandomStream` is a ``(seed, path)`` pair. The path is a tuple of
non-negative integers (for instance ``(cell, block)``) that is fed to
:class:`numpy.random.SeedSequence` as its spawn key, so two streams with the
same seed and path always produce the same numbers, and streams with
different paths are independent by construction. The bit generator is
Philox, a counter-based generator.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

SEED_ENV_VAR = "PAIREDLAB_SEED"
DEFAULT_SEED = 20260417


def default_seed() -> int:
    """Seed taken from ``$PAIREDLAB_SEED`` if set, else a fixed constant."""
    value = os.environ.get(SEED_ENV_VAR)
    if value is None or value.strip() == "":
        return DEFAULT_SEED
    return int(value, 0)


@dataclass(frozen=True)
class RandomStream:
    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        path = tuple(int(p) for p in self.path)
        if any(p < 0 for p in path):
            raise ValueError(f"stream path entries must be non-negative: {path}")
        object.__setattr__(self, "path", path)

    def child(self, *index: int) -> "RandomStream":
        """Sub-stream one or more levels below this one."""
        return RandomStream(self.seed, self.path + tuple(index))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


def as_generator(stream) -> np.random.Generator:
    """Accept a RandomStream, a Generator, an int seed or None."""
    if isinstance(stream, RandomStream):
        return stream.generator()
    if isinstance(stream, np.random.Generator):
        return stream
    if stream is None:
        return RandomStream(default_seed()).generator()
    return RandomStream(int(stream)).generator()
