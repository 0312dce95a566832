"""
Pytest configuration and fixtures for the test suite.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import structlog
import toml

from src.hoidiff.denoiser import Denoiser
from src.hoidiff.denoiser import DenoiserConfig
from src.hoidiff.models import PairSample
from src.hoidiff.models import RunConfig
from src.hoidiff.models import WorldConfig
from src.hoidiff.world import generate_dataset
from src.hoidiff.world import write_dataset

# Small enough for finite differences, large enough to exercise every layer.
TINY_H = 4
TINY_W = 3
TINY_D_A = 5
TINY_STEPS = 6


@pytest.fixture(autouse=True)
def reset_structlog():
    """Drop any logging configuration a CLI test installed."""
    yield
    structlog.reset_defaults()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for test inputs."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_denoiser_config() -> DenoiserConfig:
    """A one-block slice-mode denoiser for H=4, W=3."""
    return DenoiserConfig(
        h=TINY_H,
        w=TINY_W,
        d_a=TINY_D_A,
        steps=TINY_STEPS,
        d_model=16,
        blocks=1,
        heads=2,
        d_step=8,
        ffn_mult=2,
    )


@pytest.fixture
def tiny_model(tiny_denoiser_config) -> Denoiser:
    """Freshly initialized tiny denoiser."""
    return Denoiser.initialize(tiny_denoiser_config, seed=3)


@pytest.fixture
def tiny_world() -> WorldConfig:
    """A world with a few dozen pairs."""
    return WorldConfig(
        h=3, w=2, d_a=4, scenes=12, pairs_per_scene=(1, 3), interaction_rate=0.2, seed=5
    )


@pytest.fixture
def tiny_run_config() -> RunConfig:
    """Run config small enough for a few training steps in a test."""
    return RunConfig.model_validate(
        {
            "seed": 11,
            "world": {
                "h": 3,
                "w": 2,
                "d_a": 4,
                "scenes": 12,
                "pairs_per_scene": [1, 3],
                "interaction_rate": 0.2,
            },
            "schedule": {"steps": 5, "trials": 50, "beta_start": 0.05, "beta_end": 0.4},
            "model": {"d_model": 8, "blocks": 1, "heads": 2, "d_step": 4, "ffn_mult": 2},
            "train": {
                "m_samples": 2,
                "batch_size": 4,
                "learning_rate": 1e-3,
                "epochs": 2,
                "record_wall_time": False,
            },
            "inference": {"batch_size": 7},
        }
    )


@pytest.fixture
def tiny_config_file(tmp_path, tiny_run_config) -> Path:
    """The tiny run config written as a TOML file."""
    data = tiny_run_config.model_dump(mode="json")
    data["world"].pop("seed")
    data["train"].pop("seed")
    path = tmp_path / "tiny.toml"
    path.write_text(toml.dumps(data), encoding="utf-8")
    return path


@pytest.fixture
def tiny_dataset(tiny_run_config):
    """Generated (in-memory) dataset of the tiny run config."""
    return generate_dataset(tiny_run_config.world)


@pytest.fixture
def tiny_dataset_dir(tmp_path, tiny_dataset) -> Path:
    """The tiny dataset written to disk."""
    out = tmp_path / "data"
    write_dataset(tiny_dataset, out)
    return out


def make_pair(
    pair_id: int,
    true_object: int,
    interactions: list[int],
    *,
    h: int = 3,
    d_a: int = 2,
    object_id: int | None = None,
    scene_id: int = 0,
    prior: list[float] | None = None,
) -> PairSample:
    """Hand-built pair record for inference and metric tests."""
    if prior is None:
        prior = [1.0 / h] * h
    return PairSample(
        pair_id=pair_id,
        scene_id=scene_id,
        object_id=pair_id if object_id is None else object_id,
        true_object=true_object,
        true_interactions=interactions,
        appearance=[0.0] * d_a,
        detector_prior=prior,
    )


def pass_through_model(
    h: int, w: int, d_a: int = 2, steps: int = 4, d_model: int = 16
) -> Denoiser:
    """
    Zero-block slice denoiser whose raw output equals its input.

    Each patch embedding shifts the patch by +10 (where GELU is the identity),
    copies it into the first coordinates and shifts back; the heads read those
    coordinates out again.
    """
    config = DenoiserConfig(
        h=h, w=w, d_a=d_a, steps=steps, d_model=d_model, blocks=0, heads=1, d_step=4
    )
    model = Denoiser(config)
    for _, param in model.params:
        param.value[...] = 0.0
    for g in model.groups:
        n = g.patch_len
        model.params.value(f"embed.{g.name}.w1")[...] = np.eye(n, d_model)
        model.params.value(f"embed.{g.name}.b1")[...] = 10.0
        model.params.value(f"embed.{g.name}.w2")[...] = np.eye(d_model)
        model.params.value(f"embed.{g.name}.b2")[...] = -10.0
        model.params.value(f"head.{g.name}.w")[...] = np.eye(d_model, n)
    return model
