"""
Tests for configuration sections and pair records.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.hoidiff.models import InitMode
from src.hoidiff.models import LossMode
from src.hoidiff.models import ModelConfig
from src.hoidiff.models import PairSample
from src.hoidiff.models import RunConfig
from src.hoidiff.models import ScheduleConfig
from src.hoidiff.models import WorldConfig


class TestWorldConfig:
    """Tests for WorldConfig model."""

    def test_defaults(self):
        """Test default world settings."""
        cfg = WorldConfig()
        assert (cfg.h, cfg.w) == (6, 5)
        assert cfg.pairs_per_scene == (1, 4)
        assert cfg.seed is None

    def test_pairs_range_validation(self):
        """Test that the pairs-per-scene range must be ordered and positive."""
        with pytest.raises(ValidationError):
            WorldConfig(pairs_per_scene=(0, 2))
        with pytest.raises(ValidationError):
            WorldConfig(pairs_per_scene=(3, 2))

    def test_noise_scale(self):
        """Test the appearance noise scale at finite and infinite SNR."""
        assert WorldConfig(appearance_snr=4.0).noise_scale == 0.25
        assert WorldConfig(appearance_snr=math.inf).noise_scale == 0.0
        assert math.isinf(WorldConfig(appearance_snr=0.0).noise_scale)

    def test_unknown_key_rejected(self):
        """Test that config sections forbid unknown keys."""
        with pytest.raises(ValidationError):
            WorldConfig(height=3)


class TestScheduleAndModelConfig:
    """Tests for ScheduleConfig and ModelConfig models."""

    def test_beta_order(self):
        """Test that beta_start may not exceed beta_end."""
        with pytest.raises(ValidationError):
            ScheduleConfig(beta_start=0.2, beta_end=0.1)

    def test_explicit_betas_length(self):
        """Test that explicit betas must list one value per step."""
        assert ScheduleConfig(steps=2, betas=[0.1, 0.2]).betas == [0.1, 0.2]
        with pytest.raises(ValidationError):
            ScheduleConfig(steps=3, betas=[0.1, 0.2])

    def test_widths(self):
        """Test the head divisibility and even step width rules."""
        assert ModelConfig(d_model=12, heads=3).d_model == 12
        with pytest.raises(ValidationError):
            ModelConfig(d_model=10, heads=4)
        with pytest.raises(ValidationError):
            ModelConfig(d_step=5)


class TestRunConfig:
    """Tests for RunConfig model."""

    def test_section_seeds_follow_master(self):
        """Test that unset section seeds inherit the master seed."""
        cfg = RunConfig(seed=12)
        assert cfg.world_seed == 12
        assert cfg.train_seed == 12

    def test_enum_values(self):
        """Test that enum fields accept their string values."""
        cfg = RunConfig.model_validate(
            {"train": {"loss_mode": "both"}, "inference": {"init_mode": "uniform"}}
        )
        assert cfg.train.loss_mode is LossMode.BOTH
        assert cfg.inference.init_mode is InitMode.UNIFORM


class TestPairSample:
    """Tests for PairSample model."""

    def test_valid_pair(self):
        """Test valid pair creation and array views."""
        pair = PairSample(
            pair_id=0,
            scene_id=1,
            object_id=2,
            true_object=1,
            true_interactions=[2, 0, 2],
            appearance=[0.5, -1.0],
            detector_prior=[0.25, 0.75],
        )
        assert pair.true_interactions == [0, 2]
        np.testing.assert_array_equal(pair.prior_array, [0.25, 0.75])
        assert pair.appearance_array.dtype == np.float64

    def test_prior_must_be_distribution(self):
        """Test detector prior validation."""
        base = {
            "pair_id": 0,
            "scene_id": 0,
            "object_id": 0,
            "true_object": 0,
            "appearance": [0.0],
        }
        with pytest.raises(ValidationError):
            PairSample(**base, detector_prior=[0.5, 0.6])
        with pytest.raises(ValidationError):
            PairSample(**base, detector_prior=[1.5, -0.5])
        with pytest.raises(ValidationError):
            PairSample(**base, detector_prior=[])

    def test_label_range(self):
        """Test that the true object must index the prior."""
        with pytest.raises(ValidationError) as exc_info:
            PairSample(
                pair_id=0,
                scene_id=0,
                object_id=0,
                true_object=2,
                appearance=[0.0],
                detector_prior=[0.5, 0.5],
            )
        assert "out of range" in str(exc_info.value)

    def test_pair_is_frozen(self):
        """Test that pair records are immutable."""
        pair = PairSample(
            pair_id=0,
            scene_id=0,
            object_id=0,
            true_object=0,
            appearance=[0.0],
            detector_prior=[1.0],
        )
        with pytest.raises(ValidationError):
            pair.pair_id = 3
