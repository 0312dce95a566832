"""
Supervision tuples drawn from forward trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffusion.processes import DiffusionProcess
from ..inference.initialization import initial_image
from ..models import InitMode
from ..models import PairSample
from ..models import StepSampling
from ..world.synthetic import ground_truth_image


@dataclass(frozen=True, eq=False)
class TrainingTarget:
    """One ``(k, I_k, I_0, I_{k-1})`` tuple of a single pair."""

    k: int
    noisy: np.ndarray
    clean: np.ndarray
    prev: np.ndarray


def make_training_targets(
    pair: PairSample,
    process: DiffusionProcess,
    rng: np.random.Generator,
    *,
    w: int,
    m_samples: int = 10,
    init_mode: InitMode = InitMode.PRIOR,
    step_sampling: StepSampling = StepSampling.UNIFORM,
) -> list[TrainingTarget]:
    """
    Diffuse ``m_samples`` independent trajectories from the pair's clean image.

    With uniform step sampling every trajectory contributes one tuple at a
    step drawn from 1..K. With full-sweep sampling every trajectory is run to
    K and contributes all K tuples.
    """
    clean = ground_truth_image(pair, w).data
    init = initial_image(pair, w, init_mode)
    targets = []
    for _ in range(m_samples):
        if step_sampling is StepSampling.FULL_SWEEP:
            x = clean
            for k in range(1, process.steps + 1):
                x_next = process.step(x, init, k, rng)
                targets.append(TrainingTarget(k, x_next, clean, x))
                x = x_next
        else:
            k = int(rng.integers(1, process.steps + 1))
            noisy, prev = process.noisy_pair(clean, init, k, rng)
            targets.append(TrainingTarget(k, noisy, clean, prev))
    return targets


@dataclass(eq=False)
class TargetBatch:
    """Stacked tuples of a mini-batch, ready for one forward pass."""

    steps: np.ndarray
    noisy: np.ndarray
    clean: np.ndarray
    prev: np.ndarray
    init: np.ndarray
    appearance: np.ndarray

    def __len__(self) -> int:
        return int(self.steps.shape[0])

    @classmethod
    def collect(
        cls,
        pairs: list[PairSample],
        process: DiffusionProcess,
        rng: np.random.Generator,
        *,
        w: int,
        m_samples: int,
        init_mode: InitMode = InitMode.PRIOR,
        step_sampling: StepSampling = StepSampling.UNIFORM,
    ) -> TargetBatch:
        steps, noisy, clean, prev, init, appearance = [], [], [], [], [], []
        for pair in pairs:
            start = initial_image(pair, w, init_mode)
            for target in make_training_targets(
                pair,
                process,
                rng,
                w=w,
                m_samples=m_samples,
                init_mode=init_mode,
                step_sampling=step_sampling,
            ):
                steps.append(target.k)
                noisy.append(target.noisy)
                clean.append(target.clean)
                prev.append(target.prev)
                init.append(start)
                appearance.append(pair.appearance_array)
        return cls(
            steps=np.asarray(steps, dtype=np.int64),
            noisy=np.stack(noisy),
            clean=np.stack(clean),
            prev=np.stack(prev),
            init=np.stack(init),
            appearance=np.stack(appearance),
        )
