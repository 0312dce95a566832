"""
Validity reports for HOI images and probability vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field

import numpy as np

from ..core.hoi_image import EXTERNAL_TOLERANCE
from ..core.hoi_image import HoiImage
from ..core.hoi_image import slice_sums


@dataclass
class ValidationResult:
    """Result of validating an HOI image or a batch of simplexes."""

    is_valid: bool
    errors: list[str]
    warnings: list[str] = field(default_factory=list)
    max_deviation: float = 0.0
    min_entry: float = 0.0
    location: tuple[int, ...] | None = None

    @property
    def has_warnings(self) -> bool:
        """Check if validation has warnings."""
        return len(self.warnings) > 0

    def __bool__(self) -> bool:
        """Boolean evaluation based on validity."""
        return self.is_valid


def validate(img: HoiImage | np.ndarray, tolerance: float = EXTERNAL_TOLERANCE) -> ValidationResult:
    """
    Report slice-sum deviation, minimum entry and pass/fail for an HOI image.

    Accepts a single ``(H, W, 2)`` image or a batch ``(..., H, W, 2)``; the
    reported location indexes the full array.

    Args:
        img: Image (or raw array) to check
        tolerance: Allowed deviation of any slice sum from 1

    Returns:
        ValidationResult with the measured statistics
    """
    data = img.data if isinstance(img, HoiImage) else np.asarray(img, dtype=np.float64)
    errors: list[str] = []
    warnings: list[str] = []
    location: tuple[int, ...] | None = None

    if not np.all(np.isfinite(data)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(data))[0])
        return ValidationResult(
            False,
            [f"non-finite entry at {bad}"],
            max_deviation=float("inf"),
            min_entry=float("nan"),
            location=bad,
        )

    deviations = np.abs(slice_sums(data) - 1.0)
    max_deviation = float(deviations.max())
    min_entry = float(data.min())

    if min_entry < 0:
        location = tuple(int(i) for i in np.unravel_index(np.argmin(data), data.shape))
        errors.append(f"negative entry {min_entry:.3e} at {location}")

    if max_deviation > tolerance:
        # Index of the worst slice: (..., w)
        worst = tuple(
            int(i) for i in np.unravel_index(np.argmax(deviations), deviations.shape)
        )
        location = location or worst
        errors.append(
            f"vertical slice {worst} deviates from 1 by {max_deviation:.3e}, "
            f"beyond tolerance {tolerance:.1e}"
        )
    elif max_deviation > tolerance * 1e-3:
        warnings.append(f"slice-sum deviation {max_deviation:.3e} is close to tolerance")

    return ValidationResult(
        is_valid=not errors,
        errors=errors,
        warnings=warnings,
        max_deviation=max_deviation,
        min_entry=min_entry,
        location=location,
    )


def validate_simplex(values: np.ndarray, tolerance: float = EXTERNAL_TOLERANCE) -> ValidationResult:
    """Validate that every vector along the last axis is a probability vector."""
    values = np.asarray(values, dtype=np.float64)
    errors: list[str] = []
    if values.size == 0:
        return ValidationResult(False, ["empty probability vector"])
    if not np.all(np.isfinite(values)):
        return ValidationResult(False, ["non-finite entries"], max_deviation=float("inf"))

    max_deviation = float(np.max(np.abs(values.sum(axis=-1) - 1.0)))
    min_entry = float(values.min())
    if min_entry < 0:
        errors.append(f"negative entry {min_entry:.3e}")
    if max_deviation > tolerance:
        errors.append(f"sum deviates from 1 by {max_deviation:.3e}")
    return ValidationResult(
        is_valid=not errors,
        errors=errors,
        max_deviation=max_deviation,
        min_entry=min_entry,
    )
