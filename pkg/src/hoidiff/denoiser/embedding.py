"""
Conditioning inputs of the denoiser: appearance feature and step embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteError

MAX_PERIOD = 10_000


def sinusoidal_embedding(steps: int | np.ndarray, dim: int) -> np.ndarray:
    """
    Sinusoidal embedding of diffusion step indices.

    Args:
        steps: A step index or an array of them, shape (B,)
        dim: Even embedding width

    Returns:
        Array of shape (dim,) for a scalar step, (B, dim) otherwise;
        cosines first, then sines
    """
    half = dim // 2
    freqs = np.exp(-math.log(MAX_PERIOD) * np.arange(half) / half)
    args = np.asarray(steps, dtype=np.float64)[..., None] * freqs
    return np.concatenate([np.cos(args), np.sin(args)], axis=-1)


@dataclass(frozen=True, eq=False)
class Conditioning:
    """Appearance feature ``f_a`` and step embedding ``f_s^k`` of one pair."""

    appearance: np.ndarray
    step_embedding: np.ndarray
    step: int

    def __post_init__(self) -> None:
        appearance = np.asarray(self.appearance, dtype=np.float64)
        if not np.all(np.isfinite(appearance)):
            raise NonFiniteError("appearance feature is not finite")
        object.__setattr__(self, "appearance", appearance)

    @classmethod
    def build(cls, appearance: np.ndarray, k: int, d_step: int) -> Conditioning:
        return cls(
            appearance=appearance, step_embedding=sinusoidal_embedding(k, d_step), step=k
        )
