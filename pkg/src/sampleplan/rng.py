"""Deterministic, splittable random number streams.

Every stochastic routine in the package derives its generator from a base
seed plus an explicit substream key.  Jobs (simulation blocks, CV
iterations, dataset replicates) each get their own key, so results are
identical for any execution order or worker count.

The bit generator is Philox (counter-based), keyed through numpy's
SeedSequence spawn mechanism.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["RngSeed", "spawn_generator"]


def spawn_generator(seed: int, *stream: int) -> np.random.Generator:
    """Generator for substream ``stream`` of ``seed``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class RngSeed:
    """A seed plus substream path; (seed, stream) fully determines the
    sample sequence."""

    seed: int
    stream: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        # tolerate a bare int for the stream
        if isinstance(self.stream, int):
            object.__setattr__(self, "stream", (self.stream,))

    def child(self, *key: int) -> "RngSeed":
        return RngSeed(self.seed, self.stream + tuple(int(k) for k in key))

    def generator(self) -> np.random.Generator:
        return spawn_generator(self.seed, *self.stream)


def as_rng_seed(seed) -> RngSeed:
    """Coerce an int or RngSeed to RngSeed."""
    if isinstance(seed, RngSeed):
        return seed
    return RngSeed(int(seed))
