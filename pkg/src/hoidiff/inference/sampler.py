"""
Reverse sampling from the noisy initialization back to a clean HOI image.

At every step the predictor estimates the clean image and the process
rebuilds ``I_{k-1}`` from it: deterministically by interpolating toward the
initialization, or stochastically with a fresh multinomial draw around it.
With ``alpha_bar_0 = 1`` the final step returns the clean prediction itself.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from typing import Protocol

import numpy as np
import structlog

from ..core.hoi_image import HoiImage
from ..denoiser.embedding import Conditioning
from ..denoiser.model import Denoiser
from ..diffusion.processes import DiffusionProcess
from ..errors import NonFiniteError
from ..errors import ShapeMismatchError
from ..models import InitMode
from ..models import PairSample
from ..models import SamplingMode
from ..rng import STREAM_INFERENCE
from ..rng import derive_rng
from ..world.synthetic import ground_truth_images
from .initialization import initial_images

logger = structlog.get_logger(__name__)


class CleanPredictor(Protocol):
    """Anything that maps a batch of noisy images to clean predictions."""

    def predict(
        self, x: np.ndarray, appearance: np.ndarray, k: int, init: np.ndarray
    ) -> np.ndarray: ...


class DenoiserPredictor:
    """Predictions from a trained denoiser."""

    def __init__(self, model: Denoiser) -> None:
        self.model = model

    def predict(
        self, x: np.ndarray, appearance: np.ndarray, k: int, init: np.ndarray
    ) -> np.ndarray:
        return self.model.forward(x, appearance, k, init, cache=False)


class OraclePredictor:
    """Returns the ground-truth clean images whatever the input."""

    def __init__(self, clean: np.ndarray) -> None:
        self.clean = np.asarray(clean, dtype=np.float64)

    @classmethod
    def for_pairs(cls, pairs: list[PairSample], w: int) -> OraclePredictor:
        return cls(ground_truth_images(pairs, w))

    def predict(
        self, x: np.ndarray, appearance: np.ndarray, k: int, init: np.ndarray
    ) -> np.ndarray:
        if x.shape != self.clean.shape:
            raise ShapeMismatchError(
                f"oracle holds images of shape {self.clean.shape}, got {x.shape}"
            )
        return self.clean.copy()


@dataclass(eq=False)
class TrajectoryRecord:
    """Images ``I_K .. I_0`` of one reverse run, with their step indices."""

    steps: list[int] = field(default_factory=list)
    images: list[np.ndarray] = field(default_factory=list)

    def append(self, k: int, image: np.ndarray) -> None:
        self.steps.append(k)
        self.images.append(np.array(image, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.steps)


def reverse_sample_batch(
    init: np.ndarray,
    appearance: np.ndarray,
    predictor: CleanPredictor,
    process: DiffusionProcess,
    mode: SamplingMode = SamplingMode.DETERMINISTIC,
    rng: np.random.Generator | None = None,
    record: bool = False,
) -> tuple[np.ndarray, list[TrajectoryRecord] | None]:
    """
    Run the reverse process for a batch of pairs.

    Args:
        init: Initialization images, (B, H, W, 2)
        appearance: Appearance features, (B, d_a)
        predictor: Clean-image predictor
        process: Diffusion process the predictor was trained with
        mode: Deterministic or stochastic reverse steps
        rng: Random source (stochastic mode and the Gaussian start)
        record: Keep every intermediate image

    Returns:
        ``(I_0, trajectories)``; trajectories is None unless ``record``

    Raises:
        NonFiniteError: If a prediction or intermediate is not finite
    """
    rng = rng or np.random.default_rng(0)
    init = np.asarray(init, dtype=np.float64)
    stochastic = mode is SamplingMode.STOCHASTIC
    x = process.start(init, rng)
    trajectories = [TrajectoryRecord() for _ in range(init.shape[0])] if record else None

    def keep(k: int, images: np.ndarray) -> None:
        if trajectories is not None:
            for trajectory, image in zip(trajectories, images, strict=True):
                trajectory.append(k, image)

    keep(process.steps, x)
    for k in range(process.steps, 0, -1):
        x0_hat = predictor.predict(x, appearance, k, init)
        if not np.all(np.isfinite(x0_hat)):
            raise NonFiniteError(f"non-finite prediction at step {k}", step=k)
        x = process.reverse_step(x, x0_hat, init, k, rng, stochastic=stochastic)
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"non-finite image at step {k - 1}", step=k - 1)
        keep(k - 1, x)
    return x, trajectories


def reverse_sample(
    init: HoiImage,
    cond: Conditioning,
    predictor: CleanPredictor | Denoiser,
    process: DiffusionProcess,
    mode: SamplingMode = SamplingMode.DETERMINISTIC,
    rng: np.random.Generator | None = None,
    record: bool = False,
) -> tuple[HoiImage, TrajectoryRecord | None]:
    """Reverse-sample one pair; see ``reverse_sample_batch``."""
    if isinstance(predictor, Denoiser):
        predictor = DenoiserPredictor(predictor)
    out, trajectories = reverse_sample_batch(
        init.data[None],
        cond.appearance[None],
        predictor,
        process,
        mode=mode,
        rng=rng,
        record=record,
    )
    return HoiImage(out[0]), trajectories[0] if trajectories else None


def predict_pairs(
    pairs: list[PairSample],
    predictor: CleanPredictor,
    process: DiffusionProcess,
    *,
    w: int,
    init_mode: InitMode = InitMode.PRIOR,
    mode: SamplingMode = SamplingMode.DETERMINISTIC,
    batch_size: int = 256,
    seed: int = 0,
    threads: int = 1,
) -> np.ndarray:
    """
    Clean-image predictions for every pair, in input order.

    Batch ``i`` draws from the stream ``(seed, inference, i)``, so the result
    does not depend on ``threads``. An ``OraclePredictor`` must hold the images
    of exactly these pairs.
    """

    def sample(index: int) -> np.ndarray:
        start = index * batch_size
        chunk = pairs[start : start + batch_size]
        chunk_predictor = predictor
        if isinstance(predictor, OraclePredictor):
            chunk_predictor = OraclePredictor(predictor.clean[start : start + batch_size])
        out, _ = reverse_sample_batch(
            initial_images(chunk, w, init_mode),
            np.stack([pair.appearance_array for pair in chunk]),
            chunk_predictor,
            process,
            mode=mode,
            rng=derive_rng(seed, STREAM_INFERENCE, index),
        )
        logger.debug("batch_sampled", batch=index, pairs=len(chunk))
        return out

    batches = math.ceil(len(pairs) / batch_size)
    with ThreadPoolExecutor(max_workers=max(1, min(threads, batches))) as pool:
        outputs = list(pool.map(sample, range(batches)))
    return np.concatenate(outputs) if outputs else np.zeros((0,))
