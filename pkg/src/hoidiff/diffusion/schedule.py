"""
Noise schedule for the HOI image diffusion process.

A schedule holds the per-step noise controllers ``beta_k`` together with the
quantities derived from them:

- ``alphas``: ``1 - beta_k``
- ``alpha_bars``: running product of the alphas
- ``s_factors``: the trial-count scaling ``S_k`` that makes the closed-form
  jump match the noise variance of the iterated chain

Arrays are indexed from 0 while steps run from 1 to K; use the accessors
(``beta(k)``, ``alpha_bar(k)`` ...) rather than indexing directly.
``alpha_bar(0)`` is defined as 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import toml

from ..errors import InvalidScheduleError
from ..errors import StepOverflowError

if TYPE_CHECKING:
    from ..models import ScheduleConfig


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """All coefficients the forward and reverse processes need."""

    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    s_factors: np.ndarray
    trials: int

    @property
    def steps(self) -> int:
        """Number of diffusion steps K."""
        return int(self.betas.shape[0])

    def check_step(self, k: int, allow_zero: bool = False) -> None:
        """Raise ``StepOverflowError`` unless ``k`` is a valid step index."""
        low = 0 if allow_zero else 1
        if not low <= k <= self.steps:
            raise StepOverflowError(f"step {k} outside {low}..{self.steps}", step=k)

    def beta(self, k: int) -> float:
        self.check_step(k)
        return float(self.betas[k - 1])

    def alpha(self, k: int) -> float:
        self.check_step(k)
        return float(self.alphas[k - 1])

    def alpha_bar(self, k: int) -> float:
        self.check_step(k, allow_zero=True)
        return 1.0 if k == 0 else float(self.alpha_bars[k - 1])

    def s_factor(self, k: int) -> float:
        self.check_step(k)
        return float(self.s_factors[k - 1])

    def jump_trials(self, k: int) -> int:
        """Integer trial count ``max(1, round(S_k * T))`` of the closed-form jump."""
        return max(1, round(self.s_factor(k) * self.trials))

    def direct_denominator(self, k: int) -> float:
        """The jump variance denominator summed term by term.

        ``sum_s (beta_s * prod_{j=s+1..k} alpha_j)^2``; the recurrence in
        ``from_betas`` must agree with it.
        """
        self.check_step(k)
        total = 0.0
        for s in range(1, k + 1):
            tail = float(np.prod(self.alphas[s:k]))
            total += (self.betas[s - 1] * tail) ** 2
        return float(total)

    @classmethod
    def from_betas(cls, betas: np.ndarray | list[float], trials: int) -> NoiseSchedule:
        """
        Build a schedule from explicit per-step betas.

        Args:
            betas: Length-K sequence, every entry in (0, 1)
            trials: Multinomial trial count T

        Returns:
            NoiseSchedule with derived alphas, alpha_bars and S factors

        Raises:
            InvalidScheduleError: On empty, non-finite or out-of-range input
        """
        betas = np.asarray(betas, dtype=np.float64).reshape(-1)
        if betas.size == 0:
            raise InvalidScheduleError("schedule needs at least one step")
        if trials < 1:
            raise InvalidScheduleError(f"trials must be >= 1, got {trials}")
        if not np.all(np.isfinite(betas)) or np.any(betas <= 0) or np.any(betas >= 1):
            raise InvalidScheduleError("every beta must lie strictly between 0 and 1")

        alphas = 1.0 - betas
        alpha_bars = np.cumprod(alphas)
        denominators = np.empty_like(betas)
        denominators[0] = betas[0] ** 2
        for i in range(1, betas.size):
            denominators[i] = alphas[i] ** 2 * denominators[i - 1] + betas[i] ** 2
        s_factors = (1.0 - alpha_bars) ** 2 / denominators

        return cls(
            betas=betas,
            alphas=alphas,
            alpha_bars=alpha_bars,
            s_factors=s_factors,
            trials=int(trials),
        )


def build_schedule(
    steps: int, trials: int, beta_start: float, beta_end: float
) -> NoiseSchedule:
    """
    Build a schedule with betas linearly interpolated between two endpoints.

    Raises:
        InvalidScheduleError: If K < 1 or the beta range is out of bounds
    """
    if steps < 1:
        raise InvalidScheduleError(f"steps must be >= 1, got {steps}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise InvalidScheduleError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    return NoiseSchedule.from_betas(np.linspace(beta_start, beta_end, steps), trials)


def schedule_from_config(cfg: ScheduleConfig) -> NoiseSchedule:
    """Build the schedule a ``ScheduleConfig`` describes."""
    if cfg.betas is not None:
        return NoiseSchedule.from_betas(cfg.betas, cfg.trials)
    return build_schedule(cfg.steps, cfg.trials, cfg.beta_start, cfg.beta_end)


def dump_schedule(schedule: NoiseSchedule, path: Path) -> None:
    """Write a schedule as TOML with betas hex-encoded for bit-exact reloads."""
    payload = {
        "steps": schedule.steps,
        "trials": schedule.trials,
        "betas": [float(b).hex() for b in schedule.betas],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(toml.dumps(payload), encoding="utf-8")


def load_schedule(path: Path) -> NoiseSchedule:
    """
    Read a schedule written by ``dump_schedule``.

    Raises:
        InvalidScheduleError: If the file is malformed or inconsistent
    """
    try:
        payload = toml.load(path)
        betas = [float.fromhex(b) for b in payload["betas"]]
        steps = int(payload["steps"])
        trials = int(payload["trials"])
    except (OSError, KeyError, TypeError, ValueError, toml.TomlDecodeError) as e:
        raise InvalidScheduleError(f"cannot read schedule {path}: {e}") from e
    if len(betas) != steps:
        raise InvalidScheduleError(f"{path} lists {len(betas)} betas for {steps} steps")
    return NoiseSchedule.from_betas(betas, trials)
