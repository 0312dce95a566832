"""
Starting images of the reverse process.
"""

from __future__ import annotations

import numpy as np

from ..core.hoi_image import HoiImage
from ..core.hoi_image import HoiShape
from ..core.hoi_image import InteractionMatrix
from ..core.hoi_image import ObjectDist
from ..core.hoi_image import compose
from ..models import InitMode
from ..models import PairSample


def init_noisy_hoi_image(prior: ObjectDist | np.ndarray, w: int) -> HoiImage:
    """
    Noisy HOI image seeded by a detector prior: ``out[h, w, c] = prior[h] / 2``.

    Raises:
        InvalidSimplexError: If ``prior`` is not a distribution
    """
    v = prior if isinstance(prior, ObjectDist) else ObjectDist(np.asarray(prior))
    return compose(v, InteractionMatrix.undecided(w))


def initial_image(pair: PairSample, w: int, mode: InitMode = InitMode.PRIOR) -> np.ndarray:
    """The reverse-process start (and forward-process target) for one pair."""
    h = len(pair.detector_prior)
    if mode is InitMode.UNIFORM:
        return HoiImage.uniform(HoiShape(h, w)).data
    prior = pair.prior_array
    # Records carry priors to 1e-6; renormalize onto the exact simplex.
    return init_noisy_hoi_image(prior / prior.sum(), w).data


def initial_images(
    pairs: list[PairSample], w: int, mode: InitMode = InitMode.PRIOR
) -> np.ndarray:
    """Stacked starting images, shape (N, H, W, 2)."""
    return np.stack([initial_image(pair, w, mode) for pair in pairs])
