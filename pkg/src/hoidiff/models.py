"""
Pydantic data models for the HOI image diffusion toolkit.

These models describe every configuration section of a run and the synthetic
human-object pair records, giving validation and (de)serialization in one
place.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import field_validator
from pydantic import model_validator


class ProcessKind(str, Enum):
    """Forward diffusion process variants."""

    MULTINOMIAL = "multinomial"
    GAUSSIAN = "gaussian"
    UNNORMALIZED = "unnormalized"


class PatchMode(str, Enum):
    """How the denoiser cuts an HOI image into tokens."""

    SLICE = "slice"
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    LOCAL = "local"


class LossMode(str, Enum):
    """Which supervision signal the MSE is computed against."""

    CLEAN = "clean-target"
    PREV = "prev-step-target"
    BOTH = "both"


class StepSampling(str, Enum):
    """How diffusion steps are drawn for each training trajectory."""

    UNIFORM = "uniform"
    FULL_SWEEP = "full-sweep"


class SamplingMode(str, Enum):
    """Reverse process flavour."""

    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"


class InitMode(str, Enum):
    """Starting image of the reverse process (and target of the forward one)."""

    PRIOR = "prior"
    UNIFORM = "uniform"


class ScoreMode(str, Enum):
    """Triplet confidence used for AP ranking."""

    PRESENCE_TIMES_OBJECT = "presence-times-object"
    PRESENCE_ONLY = "presence-only"


class StrictModel(BaseModel):
    """Base for config sections: unknown keys are errors."""

    model_config = ConfigDict(
        extra="forbid", validate_assignment=True, ser_json_inf_nan="strings"
    )


class WorldConfig(StrictModel):
    """Synthetic benchmark generator settings."""

    h: int = Field(default=6, ge=1, description="Object categories (H)")
    w: int = Field(default=5, ge=1, description="Interaction categories (W)")
    d_a: int = Field(default=32, ge=1, description="Appearance feature width")
    pairs_per_scene: tuple[int, int] = Field(default=(1, 4))
    max_pairs_per_object: int = Field(default=3, ge=1)
    scenes: int = Field(default=1000, ge=1)
    test_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)
    appearance_snr: float = Field(default=4.0, ge=0.0)
    prior_temperature: float = Field(default=0.5, gt=0.0)
    prior_error_rate: float = Field(default=0.1, ge=0.0, le=1.0)
    interaction_rate: float = Field(default=0.3, gt=0.0, lt=1.0)
    rare_fraction: float = Field(
        default=0.3, ge=0.0, le=1.0, description="Share of (object, interaction) combos made rare"
    )
    rare_multiplier: float = Field(default=0.05, gt=0.0, le=1.0)
    seed: int | None = None

    @field_validator("pairs_per_scene")
    @classmethod
    def validate_pairs_range(cls, v: tuple[int, int]) -> tuple[int, int]:
        low, high = v
        if low < 1 or high < low:
            raise ValueError(f"pairs_per_scene must satisfy 1 <= min <= max, got {v}")
        return v

    @property
    def noise_scale(self) -> float:
        """Std of appearance noise; 0 when the SNR is infinite."""
        if math.isinf(self.appearance_snr):
            return 0.0
        return math.inf if self.appearance_snr == 0 else 1.0 / self.appearance_snr


class ScheduleConfig(StrictModel):
    """Noise schedule and forward-process settings."""

    steps: int = Field(default=50, ge=1, description="K")
    trials: int = Field(default=2000, ge=1, description="T")
    beta_start: float = Field(default=1e-3, gt=0.0, lt=1.0)
    # Solved so that alpha_bar_50 is about 0.008 (< 0.01).
    beta_end: float = Field(default=0.18, gt=0.0, lt=1.0)
    betas: list[float] | None = Field(
        default=None, description="Explicit betas; overrides the linear range"
    )
    process: ProcessKind = ProcessKind.MULTINOMIAL

    @model_validator(mode="after")
    def validate_range(self) -> ScheduleConfig:
        if self.betas is None and self.beta_start > self.beta_end:
            raise ValueError("beta_start must not exceed beta_end")
        if self.betas is not None and len(self.betas) != self.steps:
            raise ValueError(
                f"{len(self.betas)} explicit betas given for {self.steps} steps"
            )
        return self


class ModelConfig(StrictModel):
    """Denoiser architecture."""

    d_model: int = Field(default=128, ge=2)
    blocks: int = Field(default=4, ge=0)
    heads: int = Field(default=4, ge=1)
    d_step: int = Field(default=64, ge=2)
    ffn_mult: int = Field(default=4, ge=1)
    patch_mode: PatchMode = PatchMode.SLICE
    local_patch: int = Field(default=2, ge=1)
    condition_on_init: bool = False

    @model_validator(mode="after")
    def validate_widths(self) -> ModelConfig:
        if self.d_model % self.heads:
            raise ValueError(
                f"d_model ({self.d_model}) must be divisible by heads ({self.heads})"
            )
        if self.d_step % 2:
            raise ValueError("d_step must be even")
        return self


class TrainConfig(StrictModel):
    """Optimization settings."""

    m_samples: int = Field(default=10, ge=1, description="M")
    batch_size: int = Field(default=8, ge=1)
    learning_rate: float = Field(default=1e-4, ge=0.0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    epochs: int = Field(default=20, ge=1)
    max_steps: int | None = Field(default=None, ge=1)
    loss_mode: LossMode = LossMode.CLEAN
    step_sampling: StepSampling = StepSampling.UNIFORM
    record_wall_time: bool = True
    checkpoint_every: int = Field(default=1, ge=1, description="Epochs between checkpoints")
    seed: int | None = None


class InferenceConfig(StrictModel):
    """Reverse sampling and post-processing settings."""

    mode: SamplingMode = SamplingMode.DETERMINISTIC
    init_mode: InitMode = InitMode.PRIOR
    score_mode: ScoreMode = ScoreMode.PRESENCE_TIMES_OBJECT
    batch_size: int = Field(default=256, ge=1)


class DiagnosticsConfig(StrictModel):
    """Sample sizes and thresholds of the forward-process statistical suite."""

    conservation_chains: int = Field(default=1000, ge=1)
    conservation_h: int = Field(default=6, ge=1)
    conservation_w: int = Field(default=5, ge=1)
    terminal_samples: int = Field(default=10_000, ge=1)
    terminal_pairs: int = Field(default=20, ge=1)
    terminal_tolerance: float = Field(default=0.02, gt=0.0)
    moment_samples: int = Field(default=100_000, ge=2)
    moment_slice_length: int = Field(default=6, ge=2)
    moment_trials: int = Field(default=100, ge=1)
    moment_step: int = Field(default=5, ge=1)
    moment_sigmas: float = Field(default=4.0, gt=0.0)
    lattice_chains: int = Field(default=1_000_000, ge=1)
    lattice_trials: int = Field(default=10, ge=1)
    lattice_tv_threshold: float = Field(default=0.05, gt=0.0)
    corruption_chains: int = Field(default=10_000, ge=1)
    recurrence_tolerance: float = Field(default=1e-12, gt=0.0)


class RunConfig(StrictModel):
    """Every section of a run, merged and cross-checked."""

    seed: int = 0
    world: WorldConfig = Field(default_factory=WorldConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    inference: InferenceConfig = Field(default_factory=InferenceConfig)
    diagnostics: DiagnosticsConfig = Field(default_factory=DiagnosticsConfig)

    @model_validator(mode="after")
    def resolve_seeds(self) -> RunConfig:
        """Sections without an explicit seed inherit the master seed."""
        if self.world.seed is None:
            self.world.seed = self.seed
        if self.train.seed is None:
            self.train.seed = self.seed
        return self

    @property
    def world_seed(self) -> int:
        return self.seed if self.world.seed is None else self.world.seed

    @property
    def train_seed(self) -> int:
        return self.seed if self.train.seed is None else self.train.seed


class PairSample(BaseModel):
    """One synthetic human-object pair."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    pair_id: int = Field(ge=0)
    scene_id: int = Field(ge=0)
    object_id: int = Field(ge=0, description="Objects may be shared across pairs")
    true_object: int = Field(ge=0)
    true_interactions: list[int] = Field(default_factory=list)
    appearance: list[float]
    detector_prior: list[float]

    @field_validator("true_interactions")
    @classmethod
    def validate_interactions(cls, v: list[int]) -> list[int]:
        if any(i < 0 for i in v):
            raise ValueError("interaction indices must be non-negative")
        return sorted(set(v))

    @field_validator("detector_prior")
    @classmethod
    def validate_prior(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("detector prior must not be empty")
        if any(p < 0 for p in v):
            raise ValueError("detector prior has negative entries")
        if abs(math.fsum(v) - 1.0) > 1e-6:
            raise ValueError(f"detector prior sums to {math.fsum(v)}, not 1")
        return v

    @model_validator(mode="after")
    def validate_label_range(self) -> PairSample:
        h = len(self.detector_prior)
        if self.true_object >= h:
            raise ValueError(f"true_object {self.true_object} out of range for H={h}")
        return self

    @property
    def prior_array(self) -> np.ndarray:
        return np.asarray(self.detector_prior, dtype=np.float64)

    @property
    def appearance_array(self) -> np.ndarray:
        return np.asarray(self.appearance, dtype=np.float64)
