"""
Core HOI image types and algebra.
"""

from __future__ import annotations

from .hoi_image import EXTERNAL_TOLERANCE
from .hoi_image import INTERNAL_TOLERANCE
from .hoi_image import HoiImage
from .hoi_image import HoiShape
from .hoi_image import InteractionMatrix
from .hoi_image import ObjectDist
from .hoi_image import compose
from .hoi_image import decompose
from .hoi_image import max_slice_deviation
from .hoi_image import project_to_valid
from .hoi_image import slice_softmax
from .hoi_image import slices_to_vectors
from .hoi_image import vectors_to_slices

__all__ = [
    "EXTERNAL_TOLERANCE",
    "INTERNAL_TOLERANCE",
    "HoiImage",
    "HoiShape",
    "InteractionMatrix",
    "ObjectDist",
    "compose",
    "decompose",
    "max_slice_deviation",
    "project_to_valid",
    "slice_softmax",
    "slices_to_vectors",
    "vectors_to_slices",
]
