"""
Standard Gaussian diffusion, kept as the natural-image baseline.

Nothing here preserves the simplex: these functions exist to show what the
multinomial process fixes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedule import NoiseSchedule


@dataclass(frozen=True, eq=False)
class GaussianPosterior:
    """Mean and variance of ``q(d_{k-1} | d_k, d_0)`` for the Gaussian process."""

    mean: np.ndarray
    variance: float


def gaussian_forward_step(
    d_prev: np.ndarray, k: int, schedule: NoiseSchedule, rng: np.random.Generator
) -> np.ndarray:
    """``d_k = sqrt(1 - beta_k) d_{k-1} + sqrt(beta_k) eps``, ``eps ~ N(0, I)``."""
    beta = schedule.beta(k)
    d_prev = np.asarray(d_prev, dtype=np.float64)
    eps = rng.standard_normal(d_prev.shape)
    return np.sqrt(1.0 - beta) * d_prev + np.sqrt(beta) * eps


def gaussian_jump(
    d0: np.ndarray, k: int, schedule: NoiseSchedule, rng: np.random.Generator
) -> np.ndarray:
    """``d_k = sqrt(alpha_bar_k) d_0 + sqrt(1 - alpha_bar_k) eps``; ``k = 0`` returns ``d_0``."""
    alpha_bar = schedule.alpha_bar(k)
    d0 = np.asarray(d0, dtype=np.float64)
    if k == 0:
        return d0.copy()
    eps = rng.standard_normal(d0.shape)
    return np.sqrt(alpha_bar) * d0 + np.sqrt(1.0 - alpha_bar) * eps


def posterior_coefficients(k: int, schedule: NoiseSchedule) -> tuple[float, float, float]:
    """
    Coefficients of the Gaussian posterior at step ``k``.

    Returns:
        ``(coef_d0, coef_dk, variance)`` with
        ``mean = coef_d0 * d_0 + coef_dk * d_k``
    """
    beta = schedule.beta(k)
    alpha = schedule.alpha(k)
    alpha_bar = schedule.alpha_bar(k)
    alpha_bar_prev = schedule.alpha_bar(k - 1)
    coef_d0 = np.sqrt(alpha_bar_prev) * beta / (1.0 - alpha_bar)
    coef_dk = np.sqrt(alpha) * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar)
    variance = (1.0 - alpha_bar_prev) / (1.0 - alpha_bar) * beta
    return float(coef_d0), float(coef_dk), float(variance)


def gaussian_posterior(
    d0: np.ndarray, d_k: np.ndarray, k: int, schedule: NoiseSchedule
) -> GaussianPosterior:
    """Posterior mean and variance of ``d_{k-1}`` given ``d_k`` and ``d_0``."""
    coef_d0, coef_dk, variance = posterior_coefficients(k, schedule)
    mean = coef_d0 * np.asarray(d0, dtype=np.float64) + coef_dk * np.asarray(
        d_k, dtype=np.float64
    )
    return GaussianPosterior(mean=mean, variance=variance)
