"""
Binary checkpoint codec for denoiser parameters.

Layout (all little-endian):

    magic      4 bytes  b"HIDF"
    version    u32
    shape      8 x u32  H, W, d_model, blocks, heads, d_a, d_step, steps
    arch       4 x u32  patch mode code, local patch size, condition_on_init, ffn_mult
    n_params   u64
    values     n_params x f64, canonical parameter order
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np
import structlog

from ..errors import CheckpointError
from ..errors import ConfigError
from ..models import PatchMode
from ..nn.parameters import ParameterStore
from .model import Denoiser
from .model import DenoiserConfig
from .model import parameter_layout

logger = structlog.get_logger(__name__)

MAGIC = b"HIDF"
VERSION = 1
_HEADER = struct.Struct("<4sI8I4IQ")

PATCH_MODE_CODES = {
    PatchMode.SLICE: 0,
    PatchMode.HORIZONTAL: 1,
    PatchMode.VERTICAL: 2,
    PatchMode.LOCAL: 3,
}
_CODE_TO_MODE = {code: mode for mode, code in PATCH_MODE_CODES.items()}


def encode_checkpoint(model: Denoiser) -> bytes:
    """Serialize a model to checkpoint bytes."""
    cfg = model.config
    values = model.params.flat_values()
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        cfg.h,
        cfg.w,
        cfg.d_model,
        cfg.blocks,
        cfg.heads,
        cfg.d_a,
        cfg.d_step,
        cfg.steps,
        PATCH_MODE_CODES[cfg.patch_mode],
        cfg.local_patch,
        int(cfg.condition_on_init),
        cfg.ffn_mult,
        values.size,
    )
    return header + values.astype("<f8").tobytes()


def decode_checkpoint(data: bytes) -> Denoiser:
    """
    Rebuild a model from checkpoint bytes.

    Raises:
        CheckpointError: On a bad magic, version, header or value count
    """
    if len(data) < _HEADER.size:
        raise CheckpointError("checkpoint is truncated")
    (
        magic,
        version,
        h,
        w,
        d_model,
        blocks,
        heads,
        d_a,
        d_step,
        steps,
        mode_code,
        local_patch,
        condition_on_init,
        ffn_mult,
        n_params,
    ) = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"not a denoiser checkpoint (magic {magic!r})")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if mode_code not in _CODE_TO_MODE:
        raise CheckpointError(f"unknown patch mode code {mode_code}")

    try:
        config = DenoiserConfig(
            h=h,
            w=w,
            d_a=d_a,
            steps=steps,
            d_model=d_model,
            blocks=blocks,
            heads=heads,
            d_step=d_step,
            ffn_mult=ffn_mult,
            patch_mode=_CODE_TO_MODE[mode_code],
            local_patch=local_patch,
            condition_on_init=bool(condition_on_init),
        )
    except ConfigError as e:
        raise CheckpointError(f"checkpoint header is inconsistent: {e}") from e

    payload = data[_HEADER.size :]
    if len(payload) != 8 * n_params:
        raise CheckpointError(
            f"checkpoint declares {n_params} values but holds {len(payload) // 8}"
        )
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)

    store = ParameterStore()
    for name, shape, _ in parameter_layout(config):
        store.add(name, np.zeros(shape))
    store.load_flat(values)
    return Denoiser(config, params=store)


def save_checkpoint(model: Denoiser, path: Path) -> Path:
    """Write a checkpoint atomically (temp file, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_checkpoint(model))
    os.replace(tmp, path)
    logger.debug("checkpoint_saved", path=str(path), params=model.parameter_count)
    return path


def load_checkpoint(path: Path) -> Denoiser:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes())
