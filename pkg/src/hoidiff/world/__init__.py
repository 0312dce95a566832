"""
Synthetic HOI benchmark: generator and dataset files.
"""

from __future__ import annotations

from .dataset_io import read_dataset
from .dataset_io import write_dataset
from .synthetic import SyntheticDataset
from .synthetic import build_tables
from .synthetic import generate_dataset
from .synthetic import ground_truth_image
from .synthetic import ground_truth_images

__all__ = [
    "SyntheticDataset",
    "build_tables",
    "generate_dataset",
    "ground_truth_image",
    "ground_truth_images",
    "read_dataset",
    "write_dataset",
]
