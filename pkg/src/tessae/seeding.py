"""Deterministic RNG plumbing shared by all modules."""

import numpy as np


def as_rng(seed):
    """Coerce an int seed, SeedSequence or Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive_rng(seed, *key):
    """Independent substream for (seed, key).

    The key is a tuple of small non-negative ints (epoch, chunk, step,
    purpose, ...).  Two calls with the same arguments return generators
    producing identical output.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))
