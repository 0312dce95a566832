"""
Scaled multinomial noise.

A draw counts ``trials`` categorical samples from a probability vector and
divides the counts by ``trials``, landing on a lattice point of the simplex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.hoi_image import EXTERNAL_TOLERANCE
from ..errors import InvalidSimplexError
from ..errors import NonFiniteError


@dataclass(frozen=True, eq=False)
class MultinomialDraw:
    """Counts divided by the trial count."""

    values: np.ndarray
    trials: int

    @property
    def counts(self) -> np.ndarray:
        return np.rint(self.values * self.trials).astype(np.int64)


def _as_pvals(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0 or p.shape[-1] == 0:
        raise InvalidSimplexError("probability vector must not be empty")
    if not np.all(np.isfinite(p)):
        raise NonFiniteError("probability vector contains non-finite entries")
    if np.any(p < 0):
        raise InvalidSimplexError("probability vector has negative entries")
    sums = p.sum(axis=-1, keepdims=True)
    if np.max(np.abs(sums - 1.0)) > EXTERNAL_TOLERANCE:
        raise InvalidSimplexError(
            f"probability vector sums deviate from 1 by {np.max(np.abs(sums - 1.0)):.3e}"
        )
    # numpy rejects pvals whose leading entries overshoot 1 by rounding
    return p / sums


def scaled_multinomial(
    p: np.ndarray, trials: int | np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """
    Draw scaled multinomial noise along the last axis of ``p``.

    ``p`` may carry leading batch axes; every vector is sampled independently.
    ``trials`` broadcasts against the batch axes.
    """
    pvals = _as_pvals(p)
    n = np.asarray(trials, dtype=np.int64)
    if np.any(n < 1):
        raise InvalidSimplexError("trial count must be >= 1")
    counts = rng.multinomial(n, pvals)
    return counts / np.expand_dims(n, -1)


def sample_scaled_multinomial(
    p: np.ndarray, trials: int, rng: np.random.Generator
) -> MultinomialDraw:
    """
    Sample one scaled multinomial draw from a simplex vector.

    Args:
        p: Probability vector (length n)
        trials: Number of categorical trials, >= 1
        rng: Seeded random source

    Returns:
        MultinomialDraw whose entries are multiples of 1/trials summing to 1

    Raises:
        InvalidSimplexError: If ``p`` is not a probability vector
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise InvalidSimplexError(f"expected a 1-D probability vector, got shape {p.shape}")
    return MultinomialDraw(scaled_multinomial(p, trials, rng), int(trials))
