"""
Simplex-preserving multinomial forward process.

The process runs on slice vectors: a vertical slice of an HOI image flattened
to length 2H. Every function accepts either a single vector or an array with
leading batch axes (for example all W slices of an image, ``(..., W, 2H)``);
noise is drawn independently per vector.

- ``forward_step``: one step, ``d_k = (1 - beta_k) d_{k-1} + beta_k eps``
- ``forward_jump``: closed form from ``d_0`` with ``round(S_k T)`` trials
- ``posterior_logdensity``: the generalized-multinomial posterior used by the
  diagnostics, with the normalizer fixed to 1

The ``unnormalized_*`` helpers implement the square-root regulated variant,
which keeps multinomial noise but no longer preserves slice sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from scipy.special import xlogy

from ..core.hoi_image import EXTERNAL_TOLERANCE
from ..errors import InvalidSimplexError
from ..errors import StepOverflowError
from .multinomial import scaled_multinomial
from .schedule import NoiseSchedule

# Implied counts more negative than this are support violations, not rounding.
COUNT_TOLERANCE = 1e-7


def _check_simplex(values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0 or np.any(values < 0) or not np.all(np.isfinite(values)):
        raise InvalidSimplexError(f"{what} is not a probability vector")
    if np.max(np.abs(values.sum(axis=-1) - 1.0)) > EXTERNAL_TOLERANCE:
        raise InvalidSimplexError(f"{what} does not sum to 1")
    return values


def _broadcast_init(d_init: np.ndarray, like: np.ndarray) -> np.ndarray:
    """Repeat d_init over the batch axes of ``like`` so every vector gets its own draw."""
    d_init = np.asarray(d_init, dtype=np.float64)
    return np.broadcast_to(d_init, np.broadcast_shapes(d_init.shape, like.shape))


@dataclass(frozen=True, eq=False)
class DiffusionState:
    """Ground truth, initialization and current slice at step ``k``."""

    d0: np.ndarray
    d_init: np.ndarray
    d_k: np.ndarray
    k: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "d0", _check_simplex(self.d0, "d0"))
        object.__setattr__(self, "d_init", _check_simplex(self.d_init, "d_init"))
        object.__setattr__(self, "d_k", _check_simplex(self.d_k, "d_k"))
        if self.k < 0:
            raise StepOverflowError(f"step must be >= 0, got {self.k}", step=self.k)
        if not self.d0.shape == self.d_init.shape == self.d_k.shape:
            raise InvalidSimplexError("d0, d_init and d_k must share a shape")

    @classmethod
    def start(cls, d0: np.ndarray, d_init: np.ndarray) -> DiffusionState:
        """State at step 0 (``d_k = d_0``)."""
        return cls(d0=d0, d_init=d_init, d_k=np.array(d0, dtype=np.float64), k=0)


@dataclass(frozen=True)
class PosteriorEval:
    """Log posterior density with the normalizer held at 1."""

    log_density: float
    gamma: float = 1.0


def step_noise(
    d_prev: np.ndarray,
    d_init: np.ndarray,
    k: int,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
) -> np.ndarray:
    """Array form of one forward step from ``k - 1`` to ``k``."""
    beta = schedule.beta(k)
    d_prev = np.asarray(d_prev, dtype=np.float64)
    eps = scaled_multinomial(_broadcast_init(d_init, d_prev), schedule.trials, rng)
    return (1.0 - beta) * d_prev + beta * eps


def forward_step(
    state: DiffusionState, schedule: NoiseSchedule, rng: np.random.Generator
) -> DiffusionState:
    """
    Advance a diffusion state by one step.

    Raises:
        StepOverflowError: If the state is already at step K
    """
    k = state.k + 1
    if k > schedule.steps:
        raise StepOverflowError(
            f"cannot step past K={schedule.steps} (state at k={state.k})", step=k
        )
    d_k = step_noise(state.d_k, state.d_init, k, schedule, rng)
    return DiffusionState(d0=state.d0, d_init=state.d_init, d_k=d_k, k=k)


def forward_jump(
    d0: np.ndarray,
    d_init: np.ndarray,
    k: int,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Sample ``d_k`` directly from ``d_0``.

    ``d_k = alpha_bar_k d_0 + (1 - alpha_bar_k) eps_bar`` where ``eps_bar`` is
    scaled multinomial noise from ``d_init`` with ``round(S_k T)`` trials.

    Raises:
        StepOverflowError: If ``k`` is outside 1..K
    """
    schedule.check_step(k)
    alpha_bar = schedule.alpha_bar(k)
    d0 = np.asarray(d0, dtype=np.float64)
    eps = scaled_multinomial(_broadcast_init(d_init, d0), schedule.jump_trials(k), rng)
    return alpha_bar * d0 + (1.0 - alpha_bar) * eps


def implied_counts(
    candidate: np.ndarray, state: DiffusionState, schedule: NoiseSchedule
) -> tuple[np.ndarray, np.ndarray]:
    """Counts of the step noise and of the jump noise a candidate ``d_{k-1}`` implies."""
    k = state.k
    beta = schedule.beta(k)
    step_counts = schedule.trials * (state.d_k - (1.0 - beta) * candidate) / beta
    alpha_bar_prev = schedule.alpha_bar(k - 1)
    jump_counts = (
        schedule.s_factor(k - 1)
        * schedule.trials
        * (candidate - alpha_bar_prev * state.d0)
        / (1.0 - alpha_bar_prev)
    )
    return step_counts, jump_counts


def _log_multinomial(counts: np.ndarray, probs: np.ndarray) -> float:
    if np.any(counts < -COUNT_TOLERANCE):
        return float("-inf")
    counts = np.clip(counts, 0.0, None)
    total = counts.sum()
    value = gammaln(total + 1.0) - gammaln(counts + 1.0).sum() + xlogy(counts, probs).sum()
    return float(value)


def posterior_logdensity(
    candidate: np.ndarray, state: DiffusionState, schedule: NoiseSchedule
) -> PosteriorEval:
    """
    Log of the unnormalized posterior ``q(d_{k-1} | d_k, d_0)``.

    The product of two generalized multinomial factors, both with
    probabilities ``d_init``: one for the step noise implied between the
    candidate and ``d_k`` and one for the jump noise implied between ``d_0``
    and the candidate. Factorials are continued with the log-gamma function so
    off-lattice candidates get finite values; a negative implied count gives
    ``-inf``.

    Raises:
        StepOverflowError: If the state is at k < 2
    """
    if state.k < 2 or state.k > schedule.steps:
        raise StepOverflowError(
            f"posterior needs 2 <= k <= {schedule.steps}, got {state.k}", step=state.k
        )
    candidate = np.asarray(candidate, dtype=np.float64)
    step_counts, jump_counts = implied_counts(candidate, state, schedule)
    log_density = _log_multinomial(step_counts, state.d_init)
    if np.isfinite(log_density):
        log_density += _log_multinomial(jump_counts, state.d_init)
    return PosteriorEval(log_density=log_density)


def unnormalized_offsets(schedule: NoiseSchedule) -> np.ndarray:
    """Mean offsets ``c_k = sqrt(alpha_k) c_{k-1} + sqrt(beta_k)``, ``c_0 = 0``.

    Index 0 holds ``c_0``.
    """
    offsets = np.zeros(schedule.steps + 1)
    for k in range(1, schedule.steps + 1):
        offsets[k] = np.sqrt(schedule.alpha(k)) * offsets[k - 1] + np.sqrt(schedule.beta(k))
    return offsets


def unnormalized_jump_trials(schedule: NoiseSchedule, offsets: np.ndarray, k: int) -> int:
    """Trial count that matches the iterated variance of the unnormalized chain.

    The chain's noise variance sums to ``(1 - alpha_bar_k) / T``, so the jump
    uses ``round(c_k^2 T / (1 - alpha_bar_k))`` trials.
    """
    scale = offsets[k] ** 2 / (1.0 - schedule.alpha_bar(k))
    return max(1, round(scale * schedule.trials))


def unnormalized_forward_step(
    d_prev: np.ndarray,
    d_init: np.ndarray,
    k: int,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    One step of the square-root regulated variant, from k - 1 to k.

    Returns ``sqrt(alpha_k) d_{k-1} + sqrt(beta_k) eps``. The result is
    generally not a simplex, so it works on raw arrays rather than states.
    """
    d_prev = np.asarray(d_prev, dtype=np.float64)
    eps = scaled_multinomial(_broadcast_init(d_init, d_prev), schedule.trials, rng)
    return np.sqrt(schedule.alpha(k)) * d_prev + np.sqrt(schedule.beta(k)) * eps
