"""
Slice-patchified transformer denoiser.
"""

from __future__ import annotations

from .checkpoint import decode_checkpoint
from .checkpoint import encode_checkpoint
from .checkpoint import load_checkpoint
from .checkpoint import save_checkpoint
from .embedding import Conditioning
from .embedding import sinusoidal_embedding
from .model import Denoiser
from .model import DenoiserConfig
from .model import count_parameters
from .model import parameter_layout
from .patchify import PatchSet
from .patchify import patch_groups
from .patchify import slice_patchify

__all__ = [
    "Conditioning",
    "Denoiser",
    "DenoiserConfig",
    "PatchSet",
    "count_parameters",
    "decode_checkpoint",
    "encode_checkpoint",
    "load_checkpoint",
    "parameter_layout",
    "patch_groups",
    "save_checkpoint",
    "sinusoidal_embedding",
    "slice_patchify",
]
