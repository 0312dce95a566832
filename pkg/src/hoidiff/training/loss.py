"""
Mean squared error and the loss-mode combinations built on it.
"""

from __future__ import annotations

import numpy as np

from ..core.hoi_image import HoiImage
from ..diffusion.processes import DiffusionProcess
from ..errors import ShapeMismatchError
from ..models import LossMode
from .targets import TargetBatch


def _array(x: HoiImage | np.ndarray) -> np.ndarray:
    return x.data if isinstance(x, HoiImage) else np.asarray(x, dtype=np.float64)


def mse_loss(
    pred: HoiImage | np.ndarray, target: HoiImage | np.ndarray
) -> tuple[float, np.ndarray]:
    """
    Mean of squared entry differences and its gradient at ``pred``.

    For a batch the mean runs over all entries, which equals the mean of the
    per-image losses.

    Raises:
        ShapeMismatchError: If the shapes differ
    """
    pred_arr, target_arr = _array(pred), _array(target)
    if pred_arr.shape != target_arr.shape:
        raise ShapeMismatchError(
            f"prediction shape {pred_arr.shape} does not match target {target_arr.shape}"
        )
    diff = pred_arr - target_arr
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


def batch_loss(
    pred: np.ndarray, batch: TargetBatch, process: DiffusionProcess, mode: LossMode
) -> tuple[float, np.ndarray]:
    """
    Loss of a batch of clean-image predictions under ``mode``.

    The prev-step term compares the deterministic reconstruction of
    ``I_{k-1}`` from the prediction against the sampled ``I_{k-1}``.
    """
    loss = 0.0
    grad = np.zeros_like(pred)
    if mode in (LossMode.CLEAN, LossMode.BOTH):
        loss, grad = mse_loss(pred, batch.clean)
    if mode in (LossMode.PREV, LossMode.BOTH):
        recon = np.empty_like(pred)
        scales = np.empty(len(batch))
        for i, k in enumerate(batch.steps):
            recon[i] = process.prev_from_clean(pred[i], batch.noisy[i], batch.init[i], int(k))
            scales[i] = process.prev_scale(int(k))
        prev_loss, prev_grad = mse_loss(recon, batch.prev)
        loss += prev_loss
        grad = grad + prev_grad * scales[:, None, None, None]
    return loss, grad
