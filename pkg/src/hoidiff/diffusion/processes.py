"""
Diffusion process strategies over whole HOI images.

Training and sampling talk to a ``DiffusionProcess`` so the ablation variants
(Gaussian baseline, unnormalized regulators) swap in without touching the
trainer or the sampler. All arrays are shaped ``(..., H, W, 2)``; each
vertical slice gets independent noise.
"""

from __future__ import annotations

from abc import ABC
from abc import abstractmethod
from typing import ClassVar

import numpy as np

from ..core.hoi_image import slices_to_vectors
from ..core.hoi_image import vectors_to_slices
from ..errors import ConfigError
from ..models import ProcessKind
from .gaussian import gaussian_forward_step
from .gaussian import gaussian_jump
from .gaussian import posterior_coefficients
from .multinomial import scaled_multinomial
from .process import forward_jump
from .process import step_noise
from .process import unnormalized_forward_step
from .process import unnormalized_jump_trials
from .process import unnormalized_offsets
from .schedule import NoiseSchedule


class DiffusionProcess(ABC):
    """Forward corruption and reverse reconstruction for one process kind."""

    kind: ClassVar[ProcessKind]
    preserves_simplex: ClassVar[bool] = True

    def __init__(self, schedule: NoiseSchedule) -> None:
        self.schedule = schedule

    @property
    def steps(self) -> int:
        return self.schedule.steps

    @abstractmethod
    def jump(
        self, x0: np.ndarray, init: np.ndarray, k: int, rng: np.random.Generator
    ) -> np.ndarray:
        """Sample ``x_k`` from ``x_0``; ``k = 0`` returns ``x_0``."""

    @abstractmethod
    def step(
        self, x_prev: np.ndarray, init: np.ndarray, k: int, rng: np.random.Generator
    ) -> np.ndarray:
        """One forward step from ``k - 1`` to ``k``."""

    @abstractmethod
    def start(self, init: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Starting point ``x_K`` of the reverse process."""

    @abstractmethod
    def prev_from_clean(
        self, x0_hat: np.ndarray, x_k: np.ndarray, init: np.ndarray, k: int
    ) -> np.ndarray:
        """Deterministic reconstruction of ``x_{k-1}`` from a clean prediction."""

    @abstractmethod
    def prev_scale(self, k: int) -> float:
        """Derivative of ``prev_from_clean`` with respect to ``x0_hat``."""

    @abstractmethod
    def reverse_noise(
        self,
        x_k: np.ndarray,
        x0_hat: np.ndarray,
        init: np.ndarray,
        k: int,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """Stochastic reverse step from ``k`` to ``k - 1``."""

    def noisy_pair(
        self, x0: np.ndarray, init: np.ndarray, k: int, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        """Sample ``(x_k, x_{k-1})`` from one forward trajectory."""
        self.schedule.check_step(k)
        x_prev = self.jump(x0, init, k - 1, rng)
        return self.step(x_prev, init, k, rng), x_prev

    def reverse_step(
        self,
        x_k: np.ndarray,
        x0_hat: np.ndarray,
        init: np.ndarray,
        k: int,
        rng: np.random.Generator,
        stochastic: bool = False,
    ) -> np.ndarray:
        """One reverse step from ``k`` to ``k - 1``."""
        self.schedule.check_step(k)
        if stochastic and k > 1:
            return self.reverse_noise(x_k, x0_hat, init, k, rng)
        return self.prev_from_clean(x0_hat, x_k, init, k)


class _SliceProcess(DiffusionProcess):
    """Helpers for processes defined on flattened vertical slices."""

    @staticmethod
    def _vectors(x: np.ndarray) -> np.ndarray:
        return slices_to_vectors(np.asarray(x, dtype=np.float64))

    @staticmethod
    def _image(vectors: np.ndarray, like: np.ndarray) -> np.ndarray:
        return vectors_to_slices(vectors, like.shape[-3])


class MultinomialProcess(_SliceProcess):
    """Simplex-preserving process with scaled multinomial noise."""

    kind = ProcessKind.MULTINOMIAL

    def jump(
        self, x0: np.ndarray, init: np.ndarray, k: int, rng: np.random.Generator
    ) -> np.ndarray:
        if k == 0:
            return np.array(x0, dtype=np.float64)
        out = forward_jump(self._vectors(x0), self._vectors(init), k, self.schedule, rng)
        return self._image(out, x0)

    def step(
        self, x_prev: np.ndarray, init: np.ndarray, k: int, rng: np.random.Generator
    ) -> np.ndarray:
        out = step_noise(self._vectors(x_prev), self._vectors(init), k, self.schedule, rng)
        return self._image(out, x_prev)

    def start(self, init: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return np.array(init, dtype=np.float64)

    def prev_from_clean(
        self, x0_hat: np.ndarray, x_k: np.ndarray, init: np.ndarray, k: int
    ) -> np.ndarray:
        alpha_bar = self.schedule.alpha_bar(k - 1)
        return alpha_bar * x0_hat + (1.0 - alpha_bar) * init

    def prev_scale(self, k: int) -> float:
        return self.schedule.alpha_bar(k - 1)

    def reverse_noise(
        self,
        x_k: np.ndarray,
        x0_hat: np.ndarray,
        init: np.ndarray,
        k: int,
        rng: np.random.Generator,
    ) -> np.ndarray:
        alpha_bar = self.schedule.alpha_bar(k - 1)
        trials = self.schedule.jump_trials(k - 1)
        noise = self._image(scaled_multinomial(self._vectors(init), trials, rng), init)
        return alpha_bar * x0_hat + (1.0 - alpha_bar) * noise


class UnnormalizedProcess(_SliceProcess):
    """Multinomial noise with square-root regulators; slice sums drift."""

    kind = ProcessKind.UNNORMALIZED
    preserves_simplex = False

    def __init__(self, schedule: NoiseSchedule) -> None:
        super().__init__(schedule)
        self.offsets = unnormalized_offsets(schedule)

    def jump(
        self, x0: np.ndarray, init: np.ndarray, k: int, rng: np.random.Generator
    ) -> np.ndarray:
        if k == 0:
            return np.array(x0, dtype=np.float64)
        trials = unnormalized_jump_trials(self.schedule, self.offsets, k)
        noise = self._image(scaled_multinomial(self._vectors(init), trials, rng), init)
        return np.sqrt(self.schedule.alpha_bar(k)) * x0 + self.offsets[k] * noise

    def step(
        self, x_prev: np.ndarray, init: np.ndarray, k: int, rng: np.random.Generator
    ) -> np.ndarray:
        out = unnormalized_forward_step(
            self._vectors(x_prev), self._vectors(init), k, self.schedule, rng
        )
        return self._image(out, x_prev)

    def start(self, init: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.offsets[self.steps] * np.asarray(init, dtype=np.float64)

    def prev_from_clean(
        self, x0_hat: np.ndarray, x_k: np.ndarray, init: np.ndarray, k: int
    ) -> np.ndarray:
        return self.prev_scale(k) * x0_hat + self.offsets[k - 1] * init

    def prev_scale(self, k: int) -> float:
        return float(np.sqrt(self.schedule.alpha_bar(k - 1)))

    def reverse_noise(
        self,
        x_k: np.ndarray,
        x0_hat: np.ndarray,
        init: np.ndarray,
        k: int,
        rng: np.random.Generator,
    ) -> np.ndarray:
        return self.jump(x0_hat, init, k - 1, rng)


class GaussianProcess(DiffusionProcess):
    """The natural-image baseline: Gaussian noise, terminal state ``N(0, I)``."""

    kind = ProcessKind.GAUSSIAN
    preserves_simplex = False

    def jump(
        self, x0: np.ndarray, init: np.ndarray, k: int, rng: np.random.Generator
    ) -> np.ndarray:
        return gaussian_jump(x0, k, self.schedule, rng)

    def step(
        self, x_prev: np.ndarray, init: np.ndarray, k: int, rng: np.random.Generator
    ) -> np.ndarray:
        return gaussian_forward_step(x_prev, k, self.schedule, rng)

    def start(self, init: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(np.shape(init))

    def prev_from_clean(
        self, x0_hat: np.ndarray, x_k: np.ndarray, init: np.ndarray, k: int
    ) -> np.ndarray:
        coef_d0, coef_dk, _ = posterior_coefficients(k, self.schedule)
        return coef_d0 * x0_hat + coef_dk * x_k

    def prev_scale(self, k: int) -> float:
        return posterior_coefficients(k, self.schedule)[0]

    def reverse_noise(
        self,
        x_k: np.ndarray,
        x0_hat: np.ndarray,
        init: np.ndarray,
        k: int,
        rng: np.random.Generator,
    ) -> np.ndarray:
        coef_d0, coef_dk, variance = posterior_coefficients(k, self.schedule)
        mean = coef_d0 * x0_hat + coef_dk * x_k
        return mean + np.sqrt(variance) * rng.standard_normal(mean.shape)


_PROCESSES: dict[ProcessKind, type[DiffusionProcess]] = {
    ProcessKind.MULTINOMIAL: MultinomialProcess,
    ProcessKind.GAUSSIAN: GaussianProcess,
    ProcessKind.UNNORMALIZED: UnnormalizedProcess,
}


def create_process(kind: ProcessKind | str, schedule: NoiseSchedule) -> DiffusionProcess:
    """
    Create the diffusion process of a given kind.

    Raises:
        ConfigError: If the kind is unknown
    """
    try:
        process_class = _PROCESSES[ProcessKind(kind)]
    except (KeyError, ValueError) as e:
        available = ", ".join(k.value for k in _PROCESSES)
        raise ConfigError(f"unknown process kind {kind!r}; available: {available}") from e
    return process_class(schedule)
