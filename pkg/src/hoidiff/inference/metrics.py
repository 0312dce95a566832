"""
Detection metrics over (object class, interaction) triplet classes.

Every pair emits one scored detection for each interaction ``w`` under its
predicted object class ``h``; the detection is a true positive when the pair's
true object is ``h`` and ``w`` is one of its true interactions. AP uses the
all-point interpolated precision envelope; classes without ground-truth
positives are left out of every mean.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from ..errors import AlignmentError
from ..models import PairSample
from .postprocess import DetectionResult

TripletClass = tuple[int, int]


def average_precision(
    scores: np.ndarray, labels: np.ndarray, n_positive: int, tie_keys: np.ndarray | None = None
) -> float | None:
    """
    All-point interpolated average precision.

    Args:
        scores: Detection confidences
        labels: 1 for true positives, 0 for false positives
        n_positive: Ground-truth positives of the class (may exceed ``labels.sum()``)
        tie_keys: Secondary ascending sort key for equal scores (pair ids)

    Returns:
        AP in [0, 1], or None when the class has no positives
    """
    if n_positive <= 0:
        return None
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.size == 0:
        return 0.0
    keys = np.arange(scores.size) if tie_keys is None else np.asarray(tie_keys)
    order = np.lexsort((keys, -scores))
    tp = np.cumsum(labels[order])
    fp = np.cumsum(1.0 - labels[order])
    recall = tp / n_positive
    precision = tp / (tp + fp)

    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    changes = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[changes + 1] - mrec[changes]) * mpre[changes + 1]))


def _mean(values: list[float]) -> float:
    return float(np.mean(values)) if values else math.nan


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass
class MetricsReport:
    """Everything ``evaluate`` measures."""

    pairs: int
    objects: int
    object_accuracy: float
    triplet_precision: float
    triplet_recall: float
    triplet_f1: float
    mean_ap: float
    mean_ap_rare: float
    mean_ap_non_rare: float
    mean_ap_known_object: float
    interaction_precision: list[float] = field(default_factory=list)
    interaction_recall: list[float] = field(default_factory=list)
    interaction_f1: list[float] = field(default_factory=list)
    class_ap: dict[TripletClass, float] = field(default_factory=dict)

    def summary(self) -> dict[str, float | int]:
        """Headline numbers in a fixed order."""
        return {
            "pairs": self.pairs,
            "objects": self.objects,
            "object_accuracy": self.object_accuracy,
            "triplet_precision": self.triplet_precision,
            "triplet_recall": self.triplet_recall,
            "triplet_f1": self.triplet_f1,
            "map": self.mean_ap,
            "map_rare": self.mean_ap_rare,
            "map_non_rare": self.mean_ap_non_rare,
            "map_known_object": self.mean_ap_known_object,
        }

    def flat(self, prefix: str = "") -> dict[str, float | int]:
        """Every value under a dotted key, for the key-value metrics file."""
        out = {f"{prefix}{k}": v for k, v in self.summary().items()}
        for w, (p, r, f) in enumerate(
            zip(
                self.interaction_precision,
                self.interaction_recall,
                self.interaction_f1,
                strict=True,
            )
        ):
            out[f"{prefix}interaction.{w}.precision"] = p
            out[f"{prefix}interaction.{w}.recall"] = r
            out[f"{prefix}interaction.{w}.f1"] = f
        for (h, w), ap in sorted(self.class_ap.items()):
            out[f"{prefix}ap.{h}.{w}"] = ap
        return out


def _class_aps(
    result: DetectionResult,
    truth: dict[int, PairSample],
    n_interactions: int,
    positives: dict[TripletClass, int],
    allowed: dict[int, set[int]] | None = None,
) -> dict[TripletClass, float]:
    """AP per triplet class; ``allowed`` restricts class ``h`` to scenes in ``allowed[h]``."""
    detections: dict[TripletClass, list[tuple[float, int, int]]] = defaultdict(list)
    for det in result.pairs:
        pair = truth[det.pair_id]
        h = det.predicted_object
        if allowed is not None and pair.scene_id not in allowed.get(h, set()):
            continue
        for w in range(n_interactions):
            hit = int(pair.true_object == h and w in pair.true_interactions)
            detections[(h, w)].append((det.scores[w], det.pair_id, hit))

    aps: dict[TripletClass, float] = {}
    for triplet, n_pos in positives.items():
        rows = detections.get(triplet, [])
        ap = average_precision(
            np.array([r[0] for r in rows]),
            np.array([r[2] for r in rows]),
            n_pos,
            np.array([r[1] for r in rows]),
        )
        if ap is not None:
            aps[triplet] = ap
    return aps


def evaluate(
    result: DetectionResult,
    pairs: list[PairSample],
    n_interactions: int,
    rare_combos: set[TripletClass] | None = None,
) -> MetricsReport:
    """
    Score detections against ground truth.

    Raises:
        AlignmentError: If detections and ground-truth pairs differ
    """
    truth = {pair.pair_id: pair for pair in pairs}
    predicted_ids = [d.pair_id for d in result.pairs]
    if len(predicted_ids) != len(set(predicted_ids)) or set(predicted_ids) != set(truth):
        raise AlignmentError(
            f"{len(predicted_ids)} detections do not line up with {len(truth)} ground-truth pairs"
        )
    for det in result.pairs:
        if len(det.scores) != n_interactions:
            raise AlignmentError(
                f"pair {det.pair_id} carries {len(det.scores)} scores, expected {n_interactions}"
            )

    object_truth = {pair.object_id: pair.true_object for pair in pairs}
    correct = sum(object_truth[o] == c for o, c in result.object_classes.items())
    object_accuracy = correct / len(result.object_classes) if result.object_classes else 0.0

    tp = fp = fn = 0
    inter_counts = np.zeros((n_interactions, 3), dtype=np.int64)
    for det in result.pairs:
        pair = truth[det.pair_id]
        predicted = set(det.interactions)
        actual = set(pair.true_interactions)
        hits = len(predicted & actual) if det.predicted_object == pair.true_object else 0
        tp += hits
        fp += len(predicted) - hits
        fn += len(actual) - hits
        for w in predicted | actual:
            if w in predicted and w in actual:
                inter_counts[w, 0] += 1
            elif w in predicted:
                inter_counts[w, 1] += 1
            else:
                inter_counts[w, 2] += 1
    triplet_p, triplet_r, triplet_f1 = _prf(tp, fp, fn)
    per_interaction = [_prf(*map(int, row)) for row in inter_counts]

    positives: dict[TripletClass, int] = defaultdict(int)
    scenes_with: dict[int, set[int]] = defaultdict(set)
    for pair in pairs:
        scenes_with[pair.true_object].add(pair.scene_id)
        for w in pair.true_interactions:
            positives[(pair.true_object, w)] += 1

    class_ap = _class_aps(result, truth, n_interactions, positives)
    known_ap = _class_aps(result, truth, n_interactions, positives, allowed=scenes_with)
    rare = rare_combos or set()

    return MetricsReport(
        pairs=len(pairs),
        objects=len(result.object_classes),
        object_accuracy=object_accuracy,
        triplet_precision=triplet_p,
        triplet_recall=triplet_r,
        triplet_f1=triplet_f1,
        mean_ap=_mean(list(class_ap.values())),
        mean_ap_rare=_mean([ap for c, ap in class_ap.items() if c in rare]),
        mean_ap_non_rare=_mean([ap for c, ap in class_ap.items() if c not in rare]),
        mean_ap_known_object=_mean(list(known_ap.values())),
        interaction_precision=[p for p, _, _ in per_interaction],
        interaction_recall=[r for _, r, _ in per_interaction],
        interaction_f1=[f for _, _, f in per_interaction],
        class_ap=class_ap,
    )
