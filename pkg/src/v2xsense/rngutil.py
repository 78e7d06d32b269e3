"""Seed handling helpers.

All stochastic entry points accept either an integer seed or a ready
``numpy.random.Generator``. Derived streams use ``SeedSequence`` spawn keys so
that per-sample randomness is independent of scheduling order.
"""
from __future__ import annotations

import numpy as np


def as_rng(seed_or_rng) -> np.random.Generator:
    """Return a Generator from an int seed, a SeedSequence, or pass one through."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    if isinstance(seed_or_rng, np.random.SeedSequence):
        return np.random.default_rng(seed_or_rng)
    return np.random.default_rng(int(seed_or_rng))


def derived_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Deterministic sub-stream for (master_seed, key...), independent of call order."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)
