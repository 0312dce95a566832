"""
AdamW: adaptive moments with bias correction and decoupled weight decay.

Moments live in flat vectors in canonical parameter order, which is also the
order they are saved in.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from ..errors import NonFiniteError
from ..models import TrainConfig
from ..nn.parameters import ParameterStore


@dataclass(eq=False)
class OptimizerState:
    """First and second moment estimates plus the update counter."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, size: int) -> OptimizerState:
        return cls(np.zeros(size), np.zeros(size))

    def check_finite(self) -> None:
        if not (np.all(np.isfinite(self.m)) and np.all(np.isfinite(self.v))):
            raise NonFiniteError("optimizer moments are not finite", step=self.step)


class AdamW:
    """AdamW over every parameter of a ``ParameterStore``."""

    def __init__(
        self,
        params: ParameterStore,
        lr: float = 1e-4,
        weight_decay: float = 0.01,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        state: OptimizerState | None = None,
    ) -> None:
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = state or OptimizerState.zeros(params.count)
        if self.state.m.size != params.count:
            raise CheckpointError(
                f"optimizer state holds {self.state.m.size} moments for {params.count} parameters"
            )

    @classmethod
    def from_config(
        cls, params: ParameterStore, cfg: TrainConfig, state: OptimizerState | None = None
    ) -> AdamW:
        return cls(
            params,
            lr=cfg.learning_rate,
            weight_decay=cfg.weight_decay,
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            eps=cfg.eps,
            state=state,
        )

    def step(self) -> None:
        """
        Apply one update from the accumulated gradients.

        Raises:
            NonFiniteError: If any gradient is NaN or infinite
        """
        grads = self.params.flat_grads()
        if not np.all(np.isfinite(grads)):
            raise NonFiniteError("non-finite gradient", step=self.state.step + 1)

        state = self.state
        state.step += 1
        state.m = self.beta1 * state.m + (1.0 - self.beta1) * grads
        state.v = self.beta2 * state.v + (1.0 - self.beta2) * grads**2
        bias_correction1 = 1.0 - self.beta1**state.step
        bias_correction2 = 1.0 - self.beta2**state.step

        values = self.params.flat_values()
        values *= 1.0 - self.lr * self.weight_decay
        denom = np.sqrt(state.v) / np.sqrt(bias_correction2) + self.eps
        values -= (self.lr / bias_correction1) * state.m / denom
        self.params.load_flat(values)


def save_optimizer_state(
    state: OptimizerState, path: Path, global_step: int, epoch: int
) -> Path:
    """Write moments and progress counters (``.npz``) atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as f:
        np.savez(
            f,
            m=state.m,
            v=state.v,
            step=np.int64(state.step),
            global_step=np.int64(global_step),
            epoch=np.int64(epoch),
        )
    os.replace(tmp, path)
    return path


def load_optimizer_state(path: Path) -> tuple[OptimizerState, int, int]:
    """
    Read ``(state, global_step, epoch)``.

    Raises:
        CheckpointError: If the file is missing or incomplete
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"optimizer state not found: {path}")
    try:
        with np.load(path) as data:
            state = OptimizerState(
                m=np.array(data["m"], dtype=np.float64),
                v=np.array(data["v"], dtype=np.float64),
                step=int(data["step"]),
            )
            return state, int(data["global_step"]), int(data["epoch"])
    except (KeyError, ValueError, OSError) as e:
        raise CheckpointError(f"invalid optimizer state {path}: {e}") from e
