"""
HOI image algebra.

An HOI image is an ``H x W x 2`` array. Row ``h`` is an object category,
column ``w`` an interaction category and the last axis holds the
(presence, absence) pair. Every vertical slice ``img[:, w, :]`` is a joint
distribution over (object, presence) and sums to one.

The image is the outer product of an object distribution ``v`` (length H)
and an interaction matrix ``m`` (W rows of 2-simplexes).
"""

from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field

import numpy as np
from scipy.special import softmax

from ..errors import DimensionMismatchError
from ..errors import InvalidImageError
from ..errors import InvalidSimplexError
from ..errors import NonFiniteError

# Internally produced arrays are held to the tight tolerance, anything read
# from disk or supplied by a caller to the loose one.
INTERNAL_TOLERANCE = 1e-9
EXTERNAL_TOLERANCE = 1e-6

# Axes of a (..., H, W, 2) array that make up one vertical slice.
SLICE_AXES = (-3, -1)


@dataclass(frozen=True)
class HoiShape:
    """Height (object categories) and width (interaction categories)."""

    h: int
    w: int

    def __post_init__(self) -> None:
        if self.h < 1 or self.w < 1:
            raise DimensionMismatchError(
                f"HOI shape needs h >= 1 and w >= 1, got h={self.h}, w={self.w}"
            )

    @property
    def array_shape(self) -> tuple[int, int, int]:
        return (self.h, self.w, 2)

    @property
    def slice_length(self) -> int:
        """Number of entries in one vertical slice (2H)."""
        return 2 * self.h


def _check_simplex(values: np.ndarray, axis: int, what: str) -> None:
    if values.size == 0:
        raise DimensionMismatchError(f"{what} must not be empty")
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"{what} contains non-finite entries")
    if np.any(values < 0):
        raise InvalidSimplexError(f"{what} has negative entries")
    deviation = float(np.max(np.abs(values.sum(axis=axis) - 1.0)))
    if deviation > INTERNAL_TOLERANCE:
        raise InvalidSimplexError(
            f"{what} does not sum to 1 (max deviation {deviation:.3e})"
        )


@dataclass(frozen=True, eq=False)
class ObjectDist:
    """Distribution ``v`` over the H object categories."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1:
            raise DimensionMismatchError(
                f"object distribution must be 1-D, got shape {probs.shape}"
            )
        _check_simplex(probs, axis=0, what="object distribution")
        object.__setattr__(self, "probs", probs)

    @property
    def h(self) -> int:
        return int(self.probs.shape[0])

    @classmethod
    def one_hot(cls, index: int, h: int) -> ObjectDist:
        probs = np.zeros(h)
        probs[index] = 1.0
        return cls(probs)

    @classmethod
    def uniform(cls, h: int) -> ObjectDist:
        return cls(np.full(h, 1.0 / h))


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Per-interaction (presence, absence) distributions ``m``, shape (W, 2)."""

    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != 2:
            raise DimensionMismatchError(
                f"interaction matrix must have shape (W, 2), got {rows.shape}"
            )
        _check_simplex(rows, axis=1, what="interaction matrix")
        object.__setattr__(self, "rows", rows)

    @property
    def w(self) -> int:
        return int(self.rows.shape[0])

    @classmethod
    def from_present(cls, present: list[int] | set[int], w: int) -> InteractionMatrix:
        """Binary matrix: (1, 0) for present interactions, (0, 1) otherwise."""
        rows = np.tile([0.0, 1.0], (w, 1))
        for index in present:
            rows[index] = (1.0, 0.0)
        return cls(rows)

    @classmethod
    def undecided(cls, w: int) -> InteractionMatrix:
        """All entries 0.5."""
        return cls(np.full((w, 2), 0.5))


@dataclass(frozen=True, eq=False)
class HoiImage:
    """An ``H x W x 2`` array. Validity is checked by ``validate``, not here."""

    data: np.ndarray
    shape: HoiShape = field(init=False)

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 2:
            raise DimensionMismatchError(
                f"HOI image must have shape (H, W, 2), got {data.shape}"
            )
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "shape", HoiShape(data.shape[0], data.shape[1]))

    def vertical_slice(self, w: int) -> np.ndarray:
        """The flattened 2H-vector of column ``w`` (row-major over (h, c))."""
        return self.data[:, w, :].reshape(-1)

    @classmethod
    def uniform(cls, shape: HoiShape) -> HoiImage:
        return cls(np.full(shape.array_shape, 1.0 / shape.slice_length))


def slice_sums(data: np.ndarray) -> np.ndarray:
    """Sum of every vertical slice of a (..., H, W, 2) array; shape (..., W)."""
    return data.sum(axis=SLICE_AXES)


def max_slice_deviation(data: np.ndarray) -> float:
    return float(np.max(np.abs(slice_sums(data) - 1.0)))


def slices_to_vectors(data: np.ndarray) -> np.ndarray:
    """(..., H, W, 2) -> (..., W, 2H): every vertical slice as a flat vector."""
    moved = np.moveaxis(data, -2, -3)
    return moved.reshape(*moved.shape[:-2], -1)


def vectors_to_slices(vectors: np.ndarray, h: int) -> np.ndarray:
    """Inverse of ``slices_to_vectors``."""
    stacked = vectors.reshape(*vectors.shape[:-1], h, 2)
    return np.moveaxis(stacked, -3, -2)


def compose(v: ObjectDist, m: InteractionMatrix) -> HoiImage:
    """Outer product ``out[h, w, c] = v[h] * m[w, c]``."""
    return HoiImage(v.probs[:, None, None] * m.rows[None, :, :])


def decompose(img: HoiImage) -> tuple[ObjectDist, InteractionMatrix]:
    """Marginal decomposition into ``(v, m)``.

    ``v[h]`` is the mean row mass over columns and ``m[w]`` the slice
    marginal over objects. Exact for product-form images; for other
    slice-normalized images this is the marginal projection.

    Raises:
        InvalidImageError: If slice sums deviate from 1 by more than 1e-6.
    """
    deviation = max_slice_deviation(img.data)
    if deviation > EXTERNAL_TOLERANCE or np.any(img.data < 0):
        raise InvalidImageError(
            "cannot decompose an invalid HOI image", deviation=deviation
        )
    v = img.data.sum(axis=(1, 2)) / img.shape.w
    m = img.data.sum(axis=0)
    # Renormalize away accumulated rounding so the factor invariants hold.
    return ObjectDist(v / v.sum()), InteractionMatrix(m / m.sum(axis=1, keepdims=True))


def slice_softmax(raw: np.ndarray) -> np.ndarray:
    """Softmax over the 2H entries of every vertical slice of (..., H, W, 2)."""
    return softmax(raw, axis=SLICE_AXES)


def project_to_valid(raw: np.ndarray) -> HoiImage:
    """Map an arbitrary finite ``H x W x 2`` array onto a valid HOI image."""
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise NonFiniteError("cannot project non-finite values onto HOI images")
    return HoiImage(slice_softmax(raw))
