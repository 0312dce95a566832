"""
Schema validation for dataset files.

Pair records and dataset headers are checked against the JSON schemas under
``schemas/`` and then against the pydantic models plus cross-record rules
(label ranges, feature widths, unique pair ids).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any

import jsonschema
from pydantic import ValidationError

from ..config import SCHEMAS_DIR
from ..models import PairSample

PAIR_SCHEMA = "pair-record.schema.json"
HEADER_SCHEMA = "dataset-header.schema.json"


@dataclass
class RecordValidationResult:
    """Result of validating dataset records."""

    is_valid: bool
    errors: list[str]
    warnings: list[str] = field(default_factory=list)
    data: list[PairSample] = field(default_factory=list)

    @property
    def has_warnings(self) -> bool:
        """Check if validation has warnings."""
        return len(self.warnings) > 0

    def __bool__(self) -> bool:
        """Boolean evaluation based on validity."""
        return self.is_valid


def load_schema(name: str, schemas_dir: Path = SCHEMAS_DIR) -> dict[str, Any]:
    """
    Load a JSON schema by file name.

    Raises:
        FileNotFoundError: If the schema file is missing
    """
    path = schemas_dir / name
    if not path.exists():
        raise FileNotFoundError(f"Schema file not found: {path}")
    with path.open(encoding="utf-8") as f:
        return json.load(f)


def _schema_errors(instance: Any, schema: dict[str, Any], where: str) -> list[str]:
    errors = []
    validator = jsonschema.Draft202012Validator(schema)
    for error in sorted(validator.iter_errors(instance), key=lambda e: list(e.path)):
        message = f"{where}: schema validation error: {error.message}"
        if error.path:
            message += f" (path: {' -> '.join(str(p) for p in error.path)})"
        errors.append(message)
    return errors


def validate_records(
    records: list[dict[str, Any]],
    h: int,
    w: int,
    d_a: int,
    schema: dict[str, Any] | None = None,
) -> RecordValidationResult:
    """
    Validate pair records against the record schema and the world dimensions.

    Args:
        records: Decoded JSON objects, one per pair
        h: Number of object categories
        w: Number of interaction categories
        d_a: Appearance feature width
        schema: Pre-loaded record schema (loaded from disk when omitted)

    Returns:
        RecordValidationResult with parsed PairSample objects when valid
    """
    schema = schema if schema is not None else load_schema(PAIR_SCHEMA)
    errors: list[str] = []
    warnings: list[str] = []
    pairs: list[PairSample] = []
    seen: set[int] = set()

    for line, record in enumerate(records, start=1):
        where = f"record {line}"
        record_errors = _schema_errors(record, schema, where)
        if record_errors:
            errors.extend(record_errors)
            continue

        try:
            pair = PairSample(**record)
        except ValidationError as e:
            for error in e.errors():
                loc = " -> ".join(str(f) for f in error["loc"]) or "record"
                errors.append(f"{where}: data validation error in {loc}: {error['msg']}")
            continue

        if len(pair.detector_prior) != h:
            errors.append(
                f"{where}: detector prior has {len(pair.detector_prior)} entries, expected {h}"
            )
        if len(pair.appearance) != d_a:
            errors.append(
                f"{where}: appearance has {len(pair.appearance)} entries, expected {d_a}"
            )
        if any(i >= w for i in pair.true_interactions):
            errors.append(f"{where}: interaction index out of range for W={w}")
        if pair.pair_id in seen:
            errors.append(f"{where}: duplicate pair_id {pair.pair_id}")
        seen.add(pair.pair_id)
        pairs.append(pair)

    if not records:
        warnings.append("no records")

    return RecordValidationResult(not errors, errors, warnings, pairs if not errors else [])


def validate_header(
    header: dict[str, Any], schema: dict[str, Any] | None = None
) -> RecordValidationResult:
    """Validate a dataset header object."""
    schema = schema if schema is not None else load_schema(HEADER_SCHEMA)
    errors = _schema_errors(header, schema, "header")
    return RecordValidationResult(not errors, errors)
