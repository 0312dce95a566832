"""
Detection results as line-delimited JSON.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..inference.postprocess import DetectionResult
from .base import BaseBuilder


class ResultsBuilder(BaseBuilder):
    """One record per pair: ids, predicted class, interaction bitmask and scores."""

    default_base_name = "results"

    def get_file_extension(self) -> str:
        return "jsonl"

    def get_format_name(self) -> str:
        return "results"

    def build(self) -> Path:
        result: DetectionResult = self.payload
        lines = [json.dumps(det.as_record(), sort_keys=True) for det in result.pairs]
        return self.write_text(self.get_output_path(), "".join(f"{line}\n" for line in lines))


def read_results(path: Path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
