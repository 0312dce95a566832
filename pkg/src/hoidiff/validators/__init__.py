"""
Validation for HOI images, probability vectors and dataset files.

This package provides:
- Slice-normalization reports for HOI images
- Simplex checks for probability vectors
- JSON schema validation of dataset records and headers
"""

from __future__ import annotations

from .image import ValidationResult
from .image import validate
from .image import validate_simplex
from .schema import RecordValidationResult
from .schema import load_schema
from .schema import validate_header
from .schema import validate_records

__all__ = [
    "RecordValidationResult",
    "ValidationResult",
    "load_schema",
    "validate",
    "validate_header",
    "validate_records",
    "validate_simplex",
]
