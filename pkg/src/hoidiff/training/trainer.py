"""
Training loop: shuffled mini-batches, AdamW updates, checkpoints and a metrics log.

Every random draw of step ``n`` comes from the stream ``(seed, targets, n)``
and every epoch's shuffle from ``(seed, shuffle, epoch)``, so a run resumed
from a saved step continues exactly as the uninterrupted run would.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path

import numpy as np
import structlog

from ..config import write_resolved_config
from ..denoiser.checkpoint import load_checkpoint
from ..denoiser.checkpoint import save_checkpoint
from ..denoiser.model import Denoiser
from ..denoiser.model import DenoiserConfig
from ..diffusion.processes import create_process
from ..diffusion.schedule import schedule_from_config
from ..errors import CheckpointError
from ..errors import DatasetError
from ..errors import DivergenceError
from ..errors import NonFiniteError
from ..models import PairSample
from ..models import RunConfig
from ..rng import STREAM_TRAIN_SHUFFLE
from ..rng import STREAM_TRAIN_TARGETS
from ..rng import derive_rng
from .loss import batch_loss
from .optimizer import AdamW
from .optimizer import load_optimizer_state
from .optimizer import save_optimizer_state
from .targets import TargetBatch

logger = structlog.get_logger(__name__)

CHECKPOINT_FILE = "model.hidf"
OPTIMIZER_FILE = "optimizer.npz"
METRICS_FILE = "metrics.tsv"

ProgressCallback = Callable[[int, int, float], None]


@dataclass
class TrainingResult:
    """Outcome of a training run."""

    checkpoint: Path
    metrics_path: Path
    steps: int
    epochs: int
    final_loss: float
    interrupted: bool = False
    losses: list[float] = field(default_factory=list)


def format_metrics_line(epoch: int, step: int, loss: float, wall_ms: int) -> str:
    return f"{epoch}\t{step}\t{loss:.17g}\t{wall_ms}\n"


class Trainer:
    """Optimizes a denoiser on a list of pairs under one run configuration."""

    def __init__(
        self,
        cfg: RunConfig,
        pairs: list[PairSample],
        out_dir: Path,
        resume: bool = False,
    ) -> None:
        if not pairs:
            raise DatasetError("training needs at least one pair")
        self.cfg = cfg
        self.pairs = pairs
        self.out_dir = Path(out_dir)
        self.seed = cfg.train_seed
        self.process = create_process(cfg.schedule.process, schedule_from_config(cfg.schedule))
        self.steps_per_epoch = math.ceil(len(pairs) / cfg.train.batch_size)

        self.checkpoint_path = self.out_dir / CHECKPOINT_FILE
        self.optimizer_path = self.out_dir / OPTIMIZER_FILE
        self.metrics_path = self.out_dir / METRICS_FILE

        self.global_step = 0
        if resume:
            self.model = load_checkpoint(self.checkpoint_path)
            if self.model.config != DenoiserConfig.from_run_config(cfg):
                raise CheckpointError("checkpoint architecture does not match the config")
            state, self.global_step, _ = load_optimizer_state(self.optimizer_path)
            self.optimizer = AdamW.from_config(self.model.params, cfg.train, state)
        else:
            self.model = Denoiser.initialize(DenoiserConfig.from_run_config(cfg), self.seed)
            self.optimizer = AdamW.from_config(self.model.params, cfg.train)

    @property
    def total_steps(self) -> int:
        total = self.cfg.train.epochs * self.steps_per_epoch
        if self.cfg.train.max_steps is not None:
            total = min(total, self.cfg.train.max_steps)
        return total

    def epoch_order(self, epoch: int) -> np.ndarray:
        return derive_rng(self.seed, STREAM_TRAIN_SHUFFLE, epoch).permutation(len(self.pairs))

    def batch_pairs(self, epoch: int, index: int) -> list[PairSample]:
        """
        Exactly ``batch_size`` pairs of an epoch.

        The last batch of an epoch wraps around to the start of the same
        epoch order, so every step sees ``batch_size`` pairs.
        """
        size = self.cfg.train.batch_size
        order = self.epoch_order(epoch)
        positions = np.arange(index * size, (index + 1) * size) % len(order)
        return [self.pairs[i] for i in order[positions]]

    def train_step(self, pairs: list[PairSample]) -> float:
        """
        One optimizer update on the targets of ``pairs``.

        Raises:
            DivergenceError: If the loss, activations or gradients stop being finite
        """
        cfg = self.cfg
        rng = derive_rng(self.seed, STREAM_TRAIN_TARGETS, self.global_step)
        batch = TargetBatch.collect(
            pairs,
            self.process,
            rng,
            w=cfg.world.w,
            m_samples=cfg.train.m_samples,
            init_mode=cfg.inference.init_mode,
            step_sampling=cfg.train.step_sampling,
        )
        self.model.params.zero_grad()
        try:
            pred = self.model.forward(batch.noisy, batch.appearance, batch.steps, batch.init)
            loss, grad = batch_loss(pred, batch, self.process, cfg.train.loss_mode)
            if not math.isfinite(loss):
                raise NonFiniteError("loss is not finite", step=self.global_step + 1)
            self.model.backward(grad)
            self.optimizer.step()
        except NonFiniteError as e:
            self.save()
            logger.error("training_diverged", step=self.global_step + 1, error=str(e))
            raise DivergenceError(
                f"training diverged at step {self.global_step + 1}: {e}",
                step=self.global_step + 1,
                checkpoint_path=self.checkpoint_path,
            ) from e
        self.global_step += 1
        return loss

    def save(self) -> None:
        save_checkpoint(self.model, self.checkpoint_path)
        save_optimizer_state(
            self.optimizer.state,
            self.optimizer_path,
            self.global_step,
            self.global_step // self.steps_per_epoch,
        )

    def run(self, progress: ProgressCallback | None = None) -> TrainingResult:
        """Train until the epoch budget (or ``max_steps``) is used up."""
        cfg = self.cfg
        self.out_dir.mkdir(parents=True, exist_ok=True)
        write_resolved_config(cfg, self.out_dir)
        mode = "a" if self.global_step else "w"
        losses: list[float] = []
        interrupted = False
        total = self.total_steps
        logger.info(
            "training_started",
            pairs=len(self.pairs),
            params=self.model.parameter_count,
            start_step=self.global_step,
            total_steps=total,
        )

        with self.metrics_path.open(mode, encoding="utf-8") as log:
            try:
                while self.global_step < total:
                    epoch, index = divmod(self.global_step, self.steps_per_epoch)
                    started = time.perf_counter()
                    loss = self.train_step(self.batch_pairs(epoch, index))
                    wall_ms = (
                        int((time.perf_counter() - started) * 1000)
                        if cfg.train.record_wall_time
                        else 0
                    )
                    losses.append(loss)
                    log.write(format_metrics_line(epoch + 1, self.global_step, loss, wall_ms))
                    log.flush()
                    if progress is not None:
                        progress(self.global_step, total, loss)

                    if self.global_step % self.steps_per_epoch == 0:
                        epoch_losses = losses[-self.steps_per_epoch :]
                        logger.info(
                            "epoch_completed",
                            epoch=epoch + 1,
                            loss=float(np.mean(epoch_losses)),
                        )
                        if (epoch + 1) % cfg.train.checkpoint_every == 0:
                            self.save()
            except KeyboardInterrupt:
                interrupted = True
                logger.warning("training_interrupted", step=self.global_step)

        self.save()
        return TrainingResult(
            checkpoint=self.checkpoint_path,
            metrics_path=self.metrics_path,
            steps=self.global_step,
            epochs=math.ceil(self.global_step / self.steps_per_epoch),
            final_loss=losses[-1] if losses else math.nan,
            interrupted=interrupted,
            losses=losses,
        )


def train(
    pairs: list[PairSample],
    cfg: RunConfig,
    out_dir: Path,
    resume: bool = False,
    progress: ProgressCallback | None = None,
) -> TrainingResult:
    """Train a denoiser and write ``model.hidf``, ``optimizer.npz`` and ``metrics.tsv``."""
    return Trainer(cfg, pairs, out_dir, resume=resume).run(progress)
