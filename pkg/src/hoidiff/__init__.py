"""
HOI image diffusion toolkit.

Human-object interaction detection recast as denoising an HOI image: an
H x W x 2 array whose vertical slices are joint distributions over object
class and interaction presence. A simplex-preserving multinomial diffusion
process corrupts ground-truth images toward a detector-seeded initialization,
and a slice-patchified transformer learns to reverse it.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .config import PROJECT_ROOT
from .config import load_run_config
from .core import HoiImage
from .errors import HoiDiffError
from .models import PairSample
from .models import RunConfig

__all__ = [
    "PROJECT_ROOT",
    "HoiDiffError",
    "HoiImage",
    "PairSample",
    "RunConfig",
    "__version__",
    "load_run_config",
]
