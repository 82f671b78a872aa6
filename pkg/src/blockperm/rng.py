"""Reproducible random streams.

Every randomized routine takes a seed-like argument: an int, a
numpy SeedSequence, or an already-built Generator.  Ints and SeedSequences
are turned into counter-based Philox generators; independent substreams are
derived by spawning, so each Monte Carlo replicate and each permutation index
gets its own stream and results do not depend on evaluation order.
"""

from __future__ import annotations

import numpy as np


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None or isinstance(seed, (int, np.integer)):
        return np.random.SeedSequence(seed)
    raise TypeError(f"cannot build a seed sequence from {type(seed).__name__}")


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(as_seed_sequence(seed)))


def spawn_generators(seed, n: int) -> list[np.random.Generator]:
    """n independent generators derived from one seed."""
    children = as_seed_sequence(seed).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]
