"""
Cutting HOI images into patches and putting them back.

The slice patchification turns an ``H x W x 2`` image into H horizontal slice
patches (each ``W x 2``) and W vertical slice patches (each ``H x 2``), so
every pixel is covered once per orientation. The ablation modes keep one
orientation only, or fall back to square local patches.

A ``PatchGroup`` maps a batch ``(B, H, W, 2)`` to ``(B, tokens, patch_len)``
with ``extract`` and back with ``assemble``. ``extract`` is the adjoint of
``assemble``, which the backward pass relies on.
"""

from __future__ import annotations

from abc import ABC
from abc import abstractmethod
from dataclasses import dataclass

import numpy as np

from ..core.hoi_image import HoiImage
from ..core.hoi_image import slices_to_vectors
from ..core.hoi_image import vectors_to_slices
from ..errors import ShapeMismatchError
from ..models import PatchMode


@dataclass(frozen=True, eq=False)
class PatchSet:
    """Horizontal and vertical slice patches of one image."""

    horizontal: np.ndarray
    vertical: np.ndarray

    @property
    def count(self) -> int:
        return int(self.horizontal.shape[0] + self.vertical.shape[0])

    def depatchify(self) -> np.ndarray:
        """Rebuild the image from the horizontal patches."""
        return np.array(self.horizontal, dtype=np.float64)


def slice_patchify(img: HoiImage | np.ndarray) -> PatchSet:
    """
    Split an image into H horizontal (W x 2) and W vertical (H x 2) patches.

    Returns:
        PatchSet with ``horizontal[h] = img[h]`` and ``vertical[w] = img[:, w]``
    """
    data = img.data if isinstance(img, HoiImage) else np.asarray(img, dtype=np.float64)
    if data.ndim != 3 or data.shape[-1] != 2:
        raise ShapeMismatchError(f"expected an (H, W, 2) image, got {data.shape}")
    return PatchSet(
        horizontal=data.copy(),
        vertical=np.ascontiguousarray(data.transpose(1, 0, 2)),
    )


class PatchGroup(ABC):
    """One family of patches covering every pixel exactly once."""

    name: str

    def __init__(self, h: int, w: int) -> None:
        self.h = h
        self.w = w

    @property
    @abstractmethod
    def tokens(self) -> int:
        """Number of patches."""

    @property
    @abstractmethod
    def patch_len(self) -> int:
        """Flattened length of one patch."""

    @abstractmethod
    def extract(self, x: np.ndarray) -> np.ndarray:
        """(B, H, W, 2) -> (B, tokens, patch_len)."""

    @abstractmethod
    def assemble(self, patches: np.ndarray) -> np.ndarray:
        """(B, tokens, patch_len) -> (B, H, W, 2)."""

    def _check(self, x: np.ndarray) -> None:
        if x.shape[1:] != (self.h, self.w, 2):
            raise ShapeMismatchError(
                f"{self.name} patches expect (B, {self.h}, {self.w}, 2), got {x.shape}"
            )


class HorizontalGroup(PatchGroup):
    name = "horizontal"

    @property
    def tokens(self) -> int:
        return self.h

    @property
    def patch_len(self) -> int:
        return 2 * self.w

    def extract(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        return x.reshape(x.shape[0], self.h, self.patch_len)

    def assemble(self, patches: np.ndarray) -> np.ndarray:
        return patches.reshape(patches.shape[0], self.h, self.w, 2)


class VerticalGroup(PatchGroup):
    name = "vertical"

    @property
    def tokens(self) -> int:
        return self.w

    @property
    def patch_len(self) -> int:
        return 2 * self.h

    def extract(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        return slices_to_vectors(x)

    def assemble(self, patches: np.ndarray) -> np.ndarray:
        return vectors_to_slices(patches, self.h)


class LocalGroup(PatchGroup):
    """Square ``p x p`` patches over the (H, W) grid, zero padded at the far edges."""

    name = "local"

    def __init__(self, h: int, w: int, size: int) -> None:
        super().__init__(h, w)
        self.size = size
        self.rows = -(-h // size)
        self.cols = -(-w // size)

    @property
    def tokens(self) -> int:
        return self.rows * self.cols

    @property
    def patch_len(self) -> int:
        return 2 * self.size * self.size

    def extract(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        p = self.size
        padded = np.pad(
            x,
            ((0, 0), (0, self.rows * p - self.h), (0, self.cols * p - self.w), (0, 0)),
        )
        blocks = padded.reshape(x.shape[0], self.rows, p, self.cols, p, 2)
        return blocks.transpose(0, 1, 3, 2, 4, 5).reshape(x.shape[0], self.tokens, -1)

    def assemble(self, patches: np.ndarray) -> np.ndarray:
        p = self.size
        b = patches.shape[0]
        blocks = patches.reshape(b, self.rows, self.cols, p, p, 2)
        padded = blocks.transpose(0, 1, 3, 2, 4, 5).reshape(b, self.rows * p, self.cols * p, 2)
        return padded[:, : self.h, : self.w, :]


def patch_groups(mode: PatchMode, h: int, w: int, local_patch: int = 2) -> list[PatchGroup]:
    """The patch groups a patch mode uses, in canonical order."""
    if mode is PatchMode.SLICE:
        return [HorizontalGroup(h, w), VerticalGroup(h, w)]
    if mode is PatchMode.HORIZONTAL:
        return [HorizontalGroup(h, w)]
    if mode is PatchMode.VERTICAL:
        return [VerticalGroup(h, w)]
    return [LocalGroup(h, w, local_patch)]
