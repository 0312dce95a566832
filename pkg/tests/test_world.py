"""
Tests for the synthetic benchmark and its dataset files.
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from src.hoidiff.errors import ConfigError
from src.hoidiff.errors import DatasetError
from src.hoidiff.models import WorldConfig
from src.hoidiff.validators import validate
from src.hoidiff.world import build_tables
from src.hoidiff.world import generate_dataset
from src.hoidiff.world import ground_truth_image
from src.hoidiff.world import read_dataset
from src.hoidiff.world import write_dataset
from src.hoidiff.world.synthetic import RARE_SAMPLE_LIMIT
from src.hoidiff.world.synthetic import detector_prior
from src.hoidiff.world.synthetic import rare_combinations
from tests.conftest import make_pair


class TestGeneration:
    """Tests for generate_dataset."""

    def test_same_seed_same_dataset(self, tiny_world, tmp_path):
        """Test that a seed fixes the dataset down to its content hash."""
        first = write_dataset(generate_dataset(tiny_world), tmp_path / "a")
        second = write_dataset(generate_dataset(tiny_world), tmp_path / "b")
        assert first["content_sha256"] == second["content_sha256"]
        assert (tmp_path / "a" / "train.jsonl").read_bytes() == (
            tmp_path / "b" / "train.jsonl"
        ).read_bytes()

    def test_other_seed_other_dataset(self, tiny_world):
        """Test that changing the seed changes the pairs."""
        a = generate_dataset(tiny_world)
        b = generate_dataset(tiny_world.model_copy(update={"seed": 6}))
        assert a.train + a.test != b.train + b.test

    def test_threads_do_not_change_output(self, tiny_world):
        """Test that parallel scene generation keeps scene order."""
        serial = generate_dataset(tiny_world, threads=1)
        parallel = generate_dataset(tiny_world, threads=4)
        assert serial.train == parallel.train
        assert serial.test == parallel.test

    def test_split_by_whole_scenes(self, tiny_world):
        """Test that no scene contributes to both splits."""
        ds = generate_dataset(tiny_world)
        train_scenes = {p.scene_id for p in ds.train}
        test_scenes = {p.scene_id for p in ds.test}
        assert not train_scenes & test_scenes
        assert len(train_scenes | test_scenes) == tiny_world.scenes
        assert len(test_scenes) == round(tiny_world.test_fraction * tiny_world.scenes)

    def test_ids_and_shapes(self, tiny_world):
        """Test pair ids, object sharing and record widths."""
        ds = generate_dataset(tiny_world)
        pairs = sorted(ds.train + ds.test, key=lambda p: p.pair_id)
        assert [p.pair_id for p in pairs] == list(range(len(pairs)))
        low, high = tiny_world.pairs_per_scene
        for scene in {p.scene_id for p in pairs}:
            assert low <= sum(p.scene_id == scene for p in pairs) <= high
        by_object = {}
        for pair in pairs:
            assert len(pair.appearance) == tiny_world.d_a
            assert len(pair.detector_prior) == tiny_world.h
            assert all(0 <= i < tiny_world.w for i in pair.true_interactions)
            first = by_object.setdefault(pair.object_id, pair)
            assert first.true_object == pair.true_object
            assert first.detector_prior == pair.detector_prior
            assert first.scene_id == pair.scene_id

    def test_split_lookup(self, tiny_dataset):
        """Test split access by name."""
        assert tiny_dataset.split("train") is tiny_dataset.train
        with pytest.raises(KeyError):
            tiny_dataset.split("validation")

    @pytest.mark.slow
    def test_interaction_rate(self):
        """Test the observed presence rate against its expectation within 4 sigma."""
        cfg = WorldConfig(h=6, w=5, d_a=4, scenes=2000, rare_multiplier=0.01, seed=9)
        ds = generate_dataset(cfg, threads=4)
        pairs = ds.train + ds.test
        rates = np.stack([ds.affinity[p.true_object] for p in pairs])
        observed = sum(len(p.true_interactions) for p in pairs)
        expected = rates.sum()
        sigma = math.sqrt(float((rates * (1.0 - rates)).sum()))
        assert abs(observed - expected) < 4.0 * sigma
        assert rates.mean() == pytest.approx(cfg.interaction_rate, rel=0.1)

    def test_noiseless_limit(self):
        """Test that infinite SNR and a sharp correct prior reproduce the labels."""
        cfg = WorldConfig(
            h=4,
            w=3,
            d_a=6,
            scenes=20,
            appearance_snr=math.inf,
            prior_temperature=1e-3,
            prior_error_rate=0.0,
            interaction_rate=0.2,
            seed=2,
        )
        ds = generate_dataset(cfg)
        tables = build_tables(cfg, 2)
        for pair in ds.train + ds.test:
            assert int(np.argmax(pair.prior_array)) == pair.true_object
            assert pair.prior_array[pair.true_object] > 0.999
            expected = tables.class_embeddings[pair.true_object] + tables.interaction_embeddings[
                pair.true_interactions
            ].sum(axis=0)
            np.testing.assert_allclose(pair.appearance_array, expected, rtol=1e-12)

    def test_zero_snr_rejected(self, tiny_world):
        """Test that an SNR of zero is a configuration error."""
        with pytest.raises(ConfigError):
            generate_dataset(tiny_world.model_copy(update={"appearance_snr": 0.0}))

    def test_too_few_rare_combinations_rejected(self):
        """Test that a world where every combination is common is a configuration error."""
        cfg = WorldConfig(
            h=2,
            w=2,
            d_a=4,
            scenes=1000,
            pairs_per_scene=(1, 1),
            interaction_rate=0.4,
            rare_fraction=0.0,
            seed=3,
        )
        with pytest.raises(ConfigError, match="rare"):
            generate_dataset(cfg)


class TestTables:
    """Tests for the per-world tables and the detector prior."""

    def test_affinity_mean(self, tiny_world):
        """Test that the affinity table averages to the interaction rate."""
        tables = build_tables(tiny_world, 5)
        assert tables.affinity.shape == (3, 2)
        assert tables.affinity.mean() == pytest.approx(tiny_world.interaction_rate)
        assert tables.rare_mask.sum() == math.ceil(tiny_world.rare_fraction * 6)

    def test_rate_too_high(self):
        """Test that a rate pushing an affinity above one is rejected."""
        with pytest.raises(ConfigError):
            build_tables(WorldConfig(interaction_rate=0.9), 0)

    def test_prior_errors(self, rng):
        """Test that an error rate of one always moves the prior mode."""
        cfg = WorldConfig(h=5, prior_error_rate=1.0, prior_temperature=0.01)
        for true_object in range(5):
            prior = detector_prior(true_object, cfg, rng)
            assert prior.sum() == pytest.approx(1.0)
            assert int(np.argmax(prior)) != true_object


class TestLabels:
    """Tests for ground-truth images and rare combinations."""

    def test_ground_truth_image(self):
        """Test the one-hot object times binary interactions image."""
        img = ground_truth_image(make_pair(0, 2, [1]), 3)
        assert validate(img)
        np.testing.assert_array_equal(img.data[2, :, 0], [0.0, 1.0, 0.0])
        np.testing.assert_array_equal(img.data[2, :, 1], [1.0, 0.0, 1.0])
        assert img.data[:2].sum() == 0.0

    def test_rare_combinations(self):
        """Test the fewer-than-ten-positives rule."""
        pairs = [make_pair(i, 0, [0]) for i in range(RARE_SAMPLE_LIMIT)]
        pairs += [make_pair(100 + i, 1, [0, 1]) for i in range(RARE_SAMPLE_LIMIT - 1)]
        rare = rare_combinations(pairs, 3, 2)
        assert (0, 0) not in rare
        assert (1, 0) in rare
        assert (1, 1) in rare
        assert (2, 0) in rare
        assert len(rare) == 5

    def test_dataset_rare_set(self, tiny_dataset):
        """Test that the dataset's rare set is computed on the train split."""
        cfg = tiny_dataset.config
        assert tiny_dataset.rare_combos == rare_combinations(tiny_dataset.train, cfg.h, cfg.w)
        assert tiny_dataset.rare_set == set(tiny_dataset.rare_combos)


class TestDatasetFiles:
    """Tests for write_dataset and read_dataset."""

    def test_round_trip(self, tiny_dataset, tiny_dataset_dir):
        """Test that a written dataset reads back unchanged."""
        loaded = read_dataset(tiny_dataset_dir)
        assert loaded.train == tiny_dataset.train
        assert loaded.test == tiny_dataset.test
        assert loaded.config == tiny_dataset.config
        assert loaded.rare_combos == tiny_dataset.rare_combos
        np.testing.assert_array_equal(loaded.affinity, tiny_dataset.affinity)

    def test_header_contents(self, tiny_dataset, tiny_dataset_dir):
        """Test the header fields."""
        header = json.loads((tiny_dataset_dir / "header.json").read_text())
        assert header["format"] == "hoidiff-dataset"
        assert header["splits"] == {
            "train": len(tiny_dataset.train),
            "test": len(tiny_dataset.test),
        }
        assert len(header["content_sha256"]) == 64

    def test_tampered_split(self, tiny_dataset_dir):
        """Test that edited records fail the hash check unless it is skipped."""
        path = tiny_dataset_dir / "train.jsonl"
        lines = path.read_text().splitlines()
        record = json.loads(lines[0])
        record["appearance"][0] += 1.0
        lines[0] = json.dumps(record, sort_keys=True)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetError, match="hash"):
            read_dataset(tiny_dataset_dir)
        assert read_dataset(tiny_dataset_dir, verify_hash=False).train[0].appearance[0] == (
            record["appearance"][0]
        )

    def test_missing_header(self, tiny_dataset_dir):
        """Test that a directory without a header is rejected."""
        (tiny_dataset_dir / "header.json").unlink()
        with pytest.raises(DatasetError, match="not found"):
            read_dataset(tiny_dataset_dir)

    def test_missing_split(self, tiny_dataset_dir):
        """Test that a missing split file is rejected."""
        (tiny_dataset_dir / "test.jsonl").unlink()
        with pytest.raises(DatasetError, match="not found"):
            read_dataset(tiny_dataset_dir)

    def test_invalid_json(self, tiny_dataset_dir):
        """Test that a malformed line names its file and line."""
        (tiny_dataset_dir / "test.jsonl").write_text("{not json\n")
        with pytest.raises(DatasetError, match="test.jsonl:1"):
            read_dataset(tiny_dataset_dir)

    def test_invalid_header(self, tiny_dataset_dir):
        """Test that a header of the wrong format is rejected."""
        path = tiny_dataset_dir / "header.json"
        header = json.loads(path.read_text())
        header["format"] = "something-else"
        path.write_text(json.dumps(header))
        with pytest.raises(DatasetError):
            read_dataset(tiny_dataset_dir)
