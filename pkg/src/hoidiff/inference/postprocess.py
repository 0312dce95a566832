"""
From predicted clean HOI images to labels and triplet scores.

Pairs sharing an object vote on its class through the mean of their images;
each pair then reads its interactions off the row of that class. Argmax ties
go to the lowest index, and images are averaged in ascending ``pair_id``
order so the result does not depend on input order.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyGroupError
from ..errors import ShapeMismatchError
from ..models import PairSample
from ..models import ScoreMode


@dataclass(frozen=True)
class PairDetection:
    """Labels and per-interaction scores of one pair."""

    pair_id: int
    object_id: int
    predicted_object: int
    interactions: tuple[int, ...]
    scores: tuple[float, ...]

    @property
    def interaction_mask(self) -> int:
        """Predicted interactions as a bitmask (bit ``w`` set when present)."""
        return sum(1 << w for w in self.interactions)

    def as_record(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "object_id": self.object_id,
            "predicted_object": self.predicted_object,
            "interaction_mask": self.interaction_mask,
            "interactions": list(self.interactions),
            "scores": list(self.scores),
        }


@dataclass
class DetectionResult:
    """Per-object classes and per-pair detections, ordered by ``pair_id``."""

    object_classes: dict[int, int]
    pairs: list[PairDetection]


def object_row_mass(avg: np.ndarray) -> np.ndarray:
    """Mass of every object row, summed over interactions and channels."""
    return avg.sum(axis=(-2, -1))


def postprocess(
    pair_images: list[tuple[PairSample, np.ndarray]],
    groups: dict[int, list[int]] | None = None,
    score_mode: ScoreMode = ScoreMode.PRESENCE_TIMES_OBJECT,
) -> DetectionResult:
    """
    Turn predicted clean images into detections.

    Args:
        pair_images: ``(pair, image)`` with images shaped (H, W, 2)
        groups: object_id to pair ids; derived from the pairs when omitted
        score_mode: How triplet confidences are formed

    Returns:
        DetectionResult with one detection per pair

    Raises:
        EmptyGroupError: If a group names no pair with an image
    """
    images = {pair.pair_id: np.asarray(img, dtype=np.float64) for pair, img in pair_images}
    samples = {pair.pair_id: pair for pair, _ in pair_images}
    if groups is None:
        derived: dict[int, list[int]] = defaultdict(list)
        for pair, _ in pair_images:
            derived[pair.object_id].append(pair.pair_id)
        groups = dict(derived)

    shapes = {img.shape for img in images.values()}
    if len(shapes) > 1:
        raise ShapeMismatchError(f"predicted images have mixed shapes {sorted(shapes)}")

    object_classes: dict[int, int] = {}
    detections: list[PairDetection] = []
    for object_id in sorted(groups):
        members = sorted(pid for pid in groups[object_id] if pid in images)
        if not members:
            raise EmptyGroupError(f"object {object_id} has no predicted images")
        avg = np.mean([images[pid] for pid in members], axis=0)
        row_mass = object_row_mass(avg)
        predicted = int(np.argmax(row_mass))
        object_classes[object_id] = predicted
        object_weight = row_mass[predicted] / avg.shape[1]

        for pid in members:
            row = images[pid][predicted]
            presence = row[:, 0]
            if score_mode is ScoreMode.PRESENCE_ONLY:
                scores = presence
            else:
                scores = presence * object_weight
            detections.append(
                PairDetection(
                    pair_id=pid,
                    object_id=samples[pid].object_id if pid in samples else object_id,
                    predicted_object=predicted,
                    interactions=tuple(int(w) for w in np.flatnonzero(row[:, 0] > row[:, 1])),
                    scores=tuple(float(np.clip(s, 0.0, 1.0)) for s in scores),
                )
            )

    detections.sort(key=lambda d: d.pair_id)
    return DetectionResult(object_classes, detections)
