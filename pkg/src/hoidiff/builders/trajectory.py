"""
Reverse-trajectory exports: one binary pixmap per step and a CSV value dump.

Pixmap mapping, per file: ``log(max(x, 0) + 1e-8)``, then min-max scaling of
the whole file to 0..255 grayscale. The presence channel is drawn on the left
and the absence channel on the right, each H rows by W columns.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..inference.sampler import TrajectoryRecord
from .base import BaseBuilder
from .base import RenderError

LOG_OFFSET = 1e-8


def pixmap_levels(image: np.ndarray) -> tuple[np.ndarray, float, float]:
    """
    Grayscale levels (H, 2W) of one HOI image plus the log range used.

    Returns:
        ``(levels, log_min, log_max)``; a constant image maps to all zeros
    """
    logged = np.log(np.maximum(np.asarray(image, dtype=np.float64), 0.0) + LOG_OFFSET)
    side_by_side = np.concatenate([logged[:, :, 0], logged[:, :, 1]], axis=1)
    low, high = float(side_by_side.min()), float(side_by_side.max())
    if high > low:
        scaled = (side_by_side - low) / (high - low) * 255.0
    else:
        scaled = np.zeros_like(side_by_side)
    return np.rint(scaled).astype(np.uint8), low, high


def encode_pixmap(image: np.ndarray, step: int) -> bytes:
    """Binary P6 pixmap of one HOI image with the mapping in a header comment."""
    levels, low, high = pixmap_levels(image)
    rows, cols = levels.shape
    header = (
        f"P6\n"
        f"# step {step}: log(x + 1e-8), min-max per file, "
        f"log_min={low:.17g} log_max={high:.17g}\n"
        f"{cols} {rows}\n255\n"
    )
    rgb = np.repeat(levels[:, :, None], 3, axis=2)
    return header.encode("ascii") + rgb.tobytes()


class PixmapBuilder(BaseBuilder):
    """Writes ``step_KKK.ppm`` for every recorded step into ``output_dir``."""

    default_base_name = "step"

    def get_file_extension(self) -> str:
        return "ppm"

    def get_format_name(self) -> str:
        return "ppm"

    def build(self) -> Path:
        trajectory: TrajectoryRecord = self.payload
        if not len(trajectory):
            raise RenderError("trajectory is empty", format_type=self.get_format_name())
        for step, image in zip(trajectory.steps, trajectory.images, strict=True):
            path = self.get_output_path(f"{self.base_name}_{step:03d}")
            self.write_bytes(path, encode_pixmap(image, step))
        return self.output_dir


class ValuesBuilder(BaseBuilder):
    """
    CSV dump of raw trajectory values.

    A ``# shape H W`` comment precedes rows of ``step`` followed by the
    2HW image entries in (h, w, c) order, each as a round-trip exact float.
    """

    default_base_name = "values"

    def get_file_extension(self) -> str:
        return "csv"

    def get_format_name(self) -> str:
        return "values"

    def build(self) -> Path:
        trajectory: TrajectoryRecord = self.payload
        if not len(trajectory):
            raise RenderError("trajectory is empty", format_type=self.get_format_name())
        h, w, _ = trajectory.images[0].shape
        lines = [f"# shape {h} {w}", "# step,values in (h, w, c) order"]
        for step, image in zip(trajectory.steps, trajectory.images, strict=True):
            values = ",".join(f"{v:.17g}" for v in image.reshape(-1))
            lines.append(f"{step},{values}")
        return self.write_text(self.get_output_path(), "\n".join(lines) + "\n")


def read_values(path: Path) -> TrajectoryRecord:
    """Load a CSV value dump back into a trajectory."""
    record = TrajectoryRecord()
    shape: tuple[int, int] | None = None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# shape"):
            _, _, h, w = line.split()
            shape = (int(h), int(w))
            continue
        if not line or line.startswith("#"):
            continue
        if shape is None:
            raise RenderError(f"{path}: value dump has no shape header", format_type="values")
        step, *values = line.split(",")
        record.append(int(step), np.array([float(v) for v in values]).reshape(*shape, 2))
    return record
