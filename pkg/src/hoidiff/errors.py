"""
Exception hierarchy for the HOI image diffusion toolkit.

Every error raised on purpose by the library derives from ``HoiDiffError`` so
callers (the CLI in particular) can separate expected failures from bugs.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any


class HoiDiffError(Exception):
    """Base exception for library errors."""

    def __init__(self, message: str, **context: Any) -> None:
        self.context = context
        super().__init__(message)


class DimensionMismatchError(HoiDiffError):
    """Array shapes do not agree with the declared HOI shape."""


class ShapeMismatchError(HoiDiffError):
    """Two arrays that must share a shape do not."""


class InvalidImageError(HoiDiffError):
    """An HOI image violates the slice-normalization invariant."""

    def __init__(
        self,
        message: str,
        location: tuple[int, ...] | None = None,
        deviation: float | None = None,
    ) -> None:
        self.location = location
        self.deviation = deviation
        super().__init__(message, location=location, deviation=deviation)


class InvalidSimplexError(HoiDiffError):
    """A probability vector is negative somewhere or does not sum to one."""


class NonFiniteError(HoiDiffError):
    """NaN or infinity appeared where finite values are required."""

    def __init__(self, message: str, step: int | None = None) -> None:
        self.step = step
        super().__init__(message, step=step)


class InvalidScheduleError(HoiDiffError):
    """Noise schedule parameters are out of range."""


class StepOverflowError(HoiDiffError):
    """A diffusion step index lies outside 1..K."""


class MissingCacheError(HoiDiffError):
    """Backward was requested without a cached forward pass."""


class DivergenceError(HoiDiffError):
    """Training loss became non-finite."""

    def __init__(
        self, message: str, step: int, checkpoint_path: Path | None = None
    ) -> None:
        self.step = step
        self.checkpoint_path = checkpoint_path
        super().__init__(message, step=step, checkpoint_path=checkpoint_path)


class ConfigError(HoiDiffError):
    """Configuration could not be loaded or is inconsistent."""


class AlignmentError(HoiDiffError):
    """Predictions and ground truth do not line up."""


class EmptyGroupError(HoiDiffError):
    """An object group has no predicted images."""


class MissingPairError(HoiDiffError):
    """A requested pair id does not exist in the dataset."""


class CheckpointError(HoiDiffError):
    """A checkpoint file is malformed or incompatible."""


class DatasetError(HoiDiffError):
    """A dataset file is malformed or fails schema validation."""
