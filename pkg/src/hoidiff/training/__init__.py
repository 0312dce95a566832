"""
Denoiser training: targets, loss, optimizer and loop.
"""

from __future__ import annotations

from .loss import batch_loss
from .loss import mse_loss
from .optimizer import AdamW
from .optimizer import OptimizerState
from .optimizer import load_optimizer_state
from .optimizer import save_optimizer_state
from .targets import TargetBatch
from .targets import TrainingTarget
from .targets import make_training_targets
from .trainer import Trainer
from .trainer import TrainingResult
from .trainer import train

__all__ = [
    "AdamW",
    "OptimizerState",
    "TargetBatch",
    "Trainer",
    "TrainingResult",
    "TrainingTarget",
    "batch_loss",
    "load_optimizer_state",
    "make_training_targets",
    "mse_loss",
    "save_optimizer_state",
    "train",
]
