"""
Synthetic HOI benchmark standing in for a pre-trained detector.

Each scene holds a handful of human-object pairs. Objects get a true class and
a corrupted detector prior; pairs sharing an object share that prior. Every
pair gets a set of present interactions, drawn from a seeded affinity table in
which some (object, interaction) combinations are rare, and an appearance
feature built from linear class and interaction embeddings plus noise.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field

import numpy as np
import structlog
from scipy.special import softmax

from ..core.hoi_image import HoiImage
from ..core.hoi_image import InteractionMatrix
from ..core.hoi_image import ObjectDist
from ..core.hoi_image import compose
from ..errors import ConfigError
from ..models import PairSample
from ..models import WorldConfig
from ..rng import STREAM_WORLD
from ..rng import derive_rng

logger = structlog.get_logger(__name__)

RARE_SAMPLE_LIMIT = 10
RARE_SHARE_TARGET = 0.2

# Sub-streams of STREAM_WORLD.
_TABLES = 0
_SCENES = 1
_SPLIT = 2


@dataclass(frozen=True, eq=False)
class WorldTables:
    """Fixed per-world tables shared by every scene."""

    affinity: np.ndarray
    rare_mask: np.ndarray
    class_embeddings: np.ndarray
    interaction_embeddings: np.ndarray


@dataclass
class SyntheticDataset:
    """Generated train/test splits plus the world they came from."""

    config: WorldConfig
    train: list[PairSample]
    test: list[PairSample]
    affinity: np.ndarray
    rare_combos: list[tuple[int, int]] = field(default_factory=list)

    def split(self, name: str) -> list[PairSample]:
        if name == "train":
            return self.train
        if name == "test":
            return self.test
        raise KeyError(f"unknown split {name!r}")

    @property
    def rare_set(self) -> set[tuple[int, int]]:
        return set(self.rare_combos)


def build_tables(cfg: WorldConfig, seed: int) -> WorldTables:
    """
    Draw the affinity table and the appearance embeddings.

    The affinity table holds per-(object, interaction) presence rates. A
    ``rare_fraction`` share of the combinations is scaled down by
    ``rare_multiplier``; the table is then normalized so its mean equals
    ``interaction_rate``.

    Raises:
        ConfigError: If normalization pushes a rate above 1
    """
    rng = derive_rng(seed, STREAM_WORLD, _TABLES)
    cells = cfg.h * cfg.w
    raw = rng.uniform(0.5, 1.5, size=cells)
    rare_mask = np.zeros(cells, dtype=bool)
    n_rare = math.ceil(cfg.rare_fraction * cells)
    if n_rare:
        rare_mask[rng.choice(cells, size=n_rare, replace=False)] = True
    raw[rare_mask] *= cfg.rare_multiplier
    affinity = raw * cfg.interaction_rate / raw.mean()
    if affinity.max() > 1.0:
        raise ConfigError(
            f"interaction_rate {cfg.interaction_rate} is too high for the affinity spread "
            f"(largest rate would be {affinity.max():.3f})"
        )
    return WorldTables(
        affinity=affinity.reshape(cfg.h, cfg.w),
        rare_mask=rare_mask.reshape(cfg.h, cfg.w),
        class_embeddings=rng.standard_normal((cfg.h, cfg.d_a)),
        interaction_embeddings=rng.standard_normal((cfg.w, cfg.d_a)),
    )


def detector_prior(
    true_object: int, cfg: WorldConfig, rng: np.random.Generator
) -> np.ndarray:
    """Softmax of a (possibly wrong) one-hot mode over temperature plus noise."""
    mode = true_object
    if cfg.h > 1 and rng.random() < cfg.prior_error_rate:
        mode = (true_object + int(rng.integers(1, cfg.h))) % cfg.h
    logits = rng.standard_normal(cfg.h)
    logits[mode] += 1.0 / cfg.prior_temperature
    return softmax(logits)


def _generate_scene(
    scene_id: int, cfg: WorldConfig, tables: WorldTables, seed: int
) -> list[dict]:
    rng = derive_rng(seed, STREAM_WORLD, _SCENES, scene_id)
    low, high = cfg.pairs_per_scene
    remaining = int(rng.integers(low, high + 1))
    noise_scale = cfg.noise_scale
    pairs: list[dict] = []
    local_object = 0
    while remaining:
        share = int(rng.integers(1, min(cfg.max_pairs_per_object, remaining) + 1))
        true_object = int(rng.integers(cfg.h))
        prior = detector_prior(true_object, cfg, rng)
        for _ in range(share):
            present = np.flatnonzero(rng.random(cfg.w) < tables.affinity[true_object])
            appearance = tables.class_embeddings[true_object] + tables.interaction_embeddings[
                present
            ].sum(axis=0)
            if noise_scale:
                appearance = appearance + rng.standard_normal(cfg.d_a) * noise_scale
            pairs.append(
                {
                    "local_object": local_object,
                    "true_object": true_object,
                    "true_interactions": [int(i) for i in present],
                    "appearance": [float(x) for x in appearance],
                    "detector_prior": [float(p) for p in prior],
                }
            )
        local_object += 1
        remaining -= share
    return pairs


def rare_combinations(pairs: list[PairSample], h: int, w: int) -> list[tuple[int, int]]:
    """(object, interaction) classes with fewer than 10 positive samples."""
    counts: Counter[tuple[int, int]] = Counter()
    for pair in pairs:
        for interaction in pair.true_interactions:
            counts[(pair.true_object, interaction)] += 1
    return [
        (obj, inter)
        for obj in range(h)
        for inter in range(w)
        if counts[(obj, inter)] < RARE_SAMPLE_LIMIT
    ]


def generate_dataset(cfg: WorldConfig, threads: int = 1) -> SyntheticDataset:
    """
    Generate train and test splits.

    Scenes are generated in parallel from per-scene streams and assembled in
    scene order, so the result depends on ``cfg`` alone.

    Args:
        cfg: World settings (``cfg.seed`` must be resolved)
        threads: Worker threads for scene generation

    Returns:
        SyntheticDataset with splits made of whole scenes

    Raises:
        ConfigError: If the settings cannot produce a valid world, including one
            with fewer than ceil(0.2 * H * W) rare combinations
    """
    if cfg.appearance_snr == 0:
        raise ConfigError("appearance_snr must be positive")
    seed = 0 if cfg.seed is None else cfg.seed
    tables = build_tables(cfg, seed)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        scenes = list(
            pool.map(lambda s: _generate_scene(s, cfg, tables, seed), range(cfg.scenes))
        )

    split_rng = derive_rng(seed, STREAM_WORLD, _SPLIT)
    n_test = round(cfg.test_fraction * cfg.scenes)
    test_scenes = set(split_rng.permutation(cfg.scenes)[:n_test].tolist())

    train: list[PairSample] = []
    test: list[PairSample] = []
    pair_id = 0
    object_base = 0
    for scene_id, scene in enumerate(scenes):
        target = test if scene_id in test_scenes else train
        for record in scene:
            target.append(
                PairSample(
                    pair_id=pair_id,
                    scene_id=scene_id,
                    object_id=object_base + record["local_object"],
                    true_object=record["true_object"],
                    true_interactions=record["true_interactions"],
                    appearance=record["appearance"],
                    detector_prior=record["detector_prior"],
                )
            )
            pair_id += 1
        object_base += 1 + max((r["local_object"] for r in scene), default=-1)

    rare = rare_combinations(train, cfg.h, cfg.w)
    wanted = math.ceil(RARE_SHARE_TARGET * cfg.h * cfg.w)
    if len(rare) < wanted:
        raise ConfigError(
            f"world has {len(rare)} rare (object, interaction) combinations in training, "
            f"needs at least {wanted}; lower rare_multiplier or raise rare_fraction"
        )
    logger.info(
        "dataset_generated",
        scenes=cfg.scenes,
        train_pairs=len(train),
        test_pairs=len(test),
        rare_combinations=len(rare),
    )
    return SyntheticDataset(cfg, train, test, tables.affinity, rare)


def ground_truth_image(pair: PairSample, w: int) -> HoiImage:
    """Product of the one-hot true object and the binary interaction matrix."""
    return compose(
        ObjectDist.one_hot(pair.true_object, len(pair.detector_prior)),
        InteractionMatrix.from_present(pair.true_interactions, w),
    )


def ground_truth_images(pairs: list[PairSample], w: int) -> np.ndarray:
    """Stacked ground-truth images, shape (N, H, W, 2)."""
    return np.stack([ground_truth_image(pair, w).data for pair in pairs])
