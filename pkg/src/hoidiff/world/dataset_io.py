"""
Dataset files: one JSON record per line per split, plus a sidecar header.

The header records the world settings, split sizes, the affinity table, the
rare combinations and a SHA-256 over the split files (train then test).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np
import structlog
from pydantic import ValidationError

from ..errors import DatasetError
from ..models import PairSample
from ..models import WorldConfig
from ..validators.schema import validate_header
from ..validators.schema import validate_records
from .synthetic import SyntheticDataset

logger = structlog.get_logger(__name__)

DATASET_FORMAT = "hoidiff-dataset"
DATASET_VERSION = 1
HEADER_FILE = "header.json"
SPLITS = ("train", "test")


def split_file(name: str) -> str:
    return f"{name}.jsonl"


def encode_records(pairs: list[PairSample]) -> bytes:
    """Line-delimited JSON, keys sorted, floats in shortest round-trip form."""
    lines = [json.dumps(pair.model_dump(mode="json"), sort_keys=True) for pair in pairs]
    return "".join(line + "\n" for line in lines).encode("utf-8")


def content_hash(encoded_splits: list[bytes]) -> str:
    digest = hashlib.sha256()
    for blob in encoded_splits:
        digest.update(blob)
    return digest.hexdigest()


def build_header(dataset: SyntheticDataset, sha256: str) -> dict[str, Any]:
    return {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "world": dataset.config.model_dump(mode="json"),
        "splits": {name: len(dataset.split(name)) for name in SPLITS},
        "content_sha256": sha256,
        "affinity": dataset.affinity.tolist(),
        "rare_combos": [list(combo) for combo in dataset.rare_combos],
    }


def write_dataset(dataset: SyntheticDataset, out_dir: Path) -> dict[str, Any]:
    """
    Write both splits and the header into ``out_dir``.

    Returns:
        The header object that was written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    blobs = [encode_records(dataset.split(name)) for name in SPLITS]
    for name, blob in zip(SPLITS, blobs, strict=True):
        (out_dir / split_file(name)).write_bytes(blob)

    header = build_header(dataset, content_hash(blobs))
    (out_dir / HEADER_FILE).write_text(
        json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    logger.info("dataset_written", path=str(out_dir), sha256=header["content_sha256"])
    return header


def _read_json_lines(path: Path) -> list[dict[str, Any]]:
    records = []
    with path.open(encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path.name}:{line_no}: invalid JSON: {e}") from e
    return records


def read_dataset(data_dir: Path, verify_hash: bool = True) -> SyntheticDataset:
    """
    Load and validate a dataset directory.

    Raises:
        DatasetError: If a file is missing, fails validation or the hash differs
    """
    data_dir = Path(data_dir)
    header_path = data_dir / HEADER_FILE
    if not header_path.exists():
        raise DatasetError(f"dataset header not found: {header_path}")
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DatasetError(f"invalid dataset header: {e}") from e

    result = validate_header(header)
    if not result:
        raise DatasetError("; ".join(result.errors))
    try:
        world = WorldConfig(**header["world"])
    except ValidationError as e:
        raise DatasetError(f"dataset header has invalid world settings: {e}") from e

    blobs = []
    splits: dict[str, list[PairSample]] = {}
    for name in SPLITS:
        path = data_dir / split_file(name)
        if not path.exists():
            raise DatasetError(f"dataset split not found: {path}")
        blobs.append(path.read_bytes())
        records = validate_records(_read_json_lines(path), world.h, world.w, world.d_a)
        if not records:
            raise DatasetError(f"{path.name}: " + "; ".join(records.errors[:5]))
        splits[name] = records.data

    if verify_hash and content_hash(blobs) != header["content_sha256"]:
        raise DatasetError("dataset content does not match the header hash")

    return SyntheticDataset(
        config=world,
        train=splits["train"],
        test=splits["test"],
        affinity=np.asarray(header["affinity"], dtype=np.float64),
        rare_combos=[(int(h), int(w)) for h, w in header["rare_combos"]],
    )
