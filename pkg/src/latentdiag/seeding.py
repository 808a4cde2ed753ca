"""Deterministic random streams.

Every stochastic step draws from ``numpy.random.Generator(Philox(...))``.
Philox4x64-10 is a counter-based generator, so a stream depends only on its
key, never on the order in which other streams were consumed. Sub-streams
are derived with :class:`numpy.random.SeedSequence` using an integer
``spawn_key`` path, e.g. ``rng(seed, PROBE, factor_index, fold_index)``.
"""

from __future__ import annotations

import numpy as np

# Top-level spawn keys. Values are part of the reproducibility contract.
SYNTH = 0
PROBE = 1
JITTER = 2
MLP = 3
SHUFFLE = 4


def seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))


def rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent Philox stream for ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *keys)))


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit integer seed for a child computation."""
    return int(seed_sequence(seed, *keys).generate_state(1, dtype=np.uint64)[0])
