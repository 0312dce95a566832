"""
Seeded random stream derivation.

All randomness flows through ``numpy.random.Generator`` objects passed in by
the caller. Child streams are derived from a master seed plus a path of
integer keys, so concurrent work never shares a stream.
"""

from __future__ import annotations

import numpy as np

# Stable integer tags for the independent stream families.
STREAM_WORLD = 1
STREAM_TRAIN_SHUFFLE = 2
STREAM_TRAIN_TARGETS = 3
STREAM_MODEL_INIT = 4
STREAM_INFERENCE = 5
STREAM_DIAGNOSTICS = 6


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a generator for the child stream ``(seed, *keys)``."""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(keys))
    return np.random.default_rng(sequence)
