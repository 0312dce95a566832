"""
Tests for the metrics table, the key-value metrics file and the results file.
"""

from __future__ import annotations

import math

import pytest

from src.hoidiff.builders import EvaluationPayload
from src.hoidiff.builders import KeyValueBuilder
from src.hoidiff.builders import ResultsBuilder
from src.hoidiff.builders import TableBuilder
from src.hoidiff.builders.report import format_value
from src.hoidiff.builders.report import read_key_values
from src.hoidiff.builders.results import read_results
from src.hoidiff.inference import DetectionResult
from src.hoidiff.inference import MetricsReport
from src.hoidiff.inference import PairDetection


@pytest.fixture
def report() -> MetricsReport:
    """A two-interaction report with one rare-free mean."""
    return MetricsReport(
        pairs=12,
        objects=9,
        object_accuracy=0.75,
        triplet_precision=0.5,
        triplet_recall=0.25,
        triplet_f1=1.0 / 3.0,
        mean_ap=0.625,
        mean_ap_rare=math.nan,
        mean_ap_non_rare=0.625,
        mean_ap_known_object=0.7,
        interaction_precision=[0.5, 1.0],
        interaction_recall=[0.25, 0.0],
        interaction_f1=[1.0 / 3.0, 0.0],
        class_ap={(0, 1): 0.5, (2, 0): 0.75},
    )


@pytest.fixture
def payload(report) -> EvaluationPayload:
    """Model and prior-only reports with run metadata."""
    return EvaluationPayload(
        reports={"model": report, "prior_only": report},
        meta={"checkpoint": "run/model.ckpt", "split": "test"},
    )


class TestFormatValue:
    """Tests for format_value."""

    def test_values(self):
        """Test integer, float and NaN formatting."""
        assert format_value(12) == "12"
        assert format_value(0.625) == "0.625000"
        assert format_value(math.nan) == "nan"


class TestTableBuilder:
    """Tests for TableBuilder."""

    def test_table(self, payload, tmp_path):
        """Test that the table lists every report column and metric row."""
        path = TableBuilder(payload, tmp_path).build()
        assert path == tmp_path / "metrics.txt"
        text = path.read_text()
        assert "HOI detection metrics" in text
        assert "split: test" in text
        header = next(line for line in text.splitlines() if line.startswith("metric"))
        assert "model" in header
        assert "prior_only" in header
        map_row = next(line for line in text.splitlines() if line.startswith("map "))
        assert map_row.split()[1:] == ["0.625000", "0.625000"]
        assert "nan" in next(line for line in text.splitlines() if line.startswith("map_rare"))
        assert "w=1" in text


class TestKeyValueBuilder:
    """Tests for KeyValueBuilder."""

    def test_key_values(self, payload, tmp_path):
        """Test that every value is written under its prefixed key."""
        path = KeyValueBuilder(payload, tmp_path).build()
        assert path.name == "metrics.kv"
        values = read_key_values(path)
        assert values["meta.split"] == "test"
        assert values["model.pairs"] == "12"
        assert float(values["model.map"]) == 0.625
        assert float(values["prior_only.triplet_f1"]) == 1.0 / 3.0
        assert math.isnan(float(values["model.map_rare"]))
        assert float(values["model.ap.2.0"]) == 0.75
        assert float(values["model.interaction.0.recall"]) == 0.25

    def test_keys_are_unique(self, payload, tmp_path):
        """Test that no key is written twice."""
        lines = KeyValueBuilder(payload, tmp_path).build().read_text().splitlines()
        keys = [line.partition("=")[0] for line in lines]
        assert len(keys) == len(set(keys))


class TestResultsBuilder:
    """Tests for ResultsBuilder."""

    def test_records(self, tmp_path):
        """Test one JSON record per pair with the interaction bitmask."""
        result = DetectionResult(
            object_classes={3: 1},
            pairs=[
                PairDetection(0, 3, 1, (0, 2), (0.9, 0.1, 0.8)),
                PairDetection(1, 3, 1, (), (0.0, 0.2, 0.3)),
            ],
        )
        path = ResultsBuilder(result, tmp_path).build()
        assert path.name == "results.jsonl"
        records = read_results(path)
        assert [r["pair_id"] for r in records] == [0, 1]
        assert records[0]["interaction_mask"] == 5
        assert records[1]["interaction_mask"] == 0
        assert records[0]["scores"] == [0.9, 0.1, 0.8]
