"""
Testing pipeline: initialization, reverse sampling, post-processing and metrics.
"""

from __future__ import annotations

from .initialization import init_noisy_hoi_image
from .initialization import initial_image
from .initialization import initial_images
from .metrics import MetricsReport
from .metrics import average_precision
from .metrics import evaluate
from .postprocess import DetectionResult
from .postprocess import PairDetection
from .postprocess import postprocess
from .sampler import DenoiserPredictor
from .sampler import OraclePredictor
from .sampler import TrajectoryRecord
from .sampler import predict_pairs
from .sampler import reverse_sample
from .sampler import reverse_sample_batch

__all__ = [
    "DenoiserPredictor",
    "DetectionResult",
    "MetricsReport",
    "OraclePredictor",
    "PairDetection",
    "TrajectoryRecord",
    "average_precision",
    "evaluate",
    "init_noisy_hoi_image",
    "initial_image",
    "initial_images",
    "postprocess",
    "predict_pairs",
    "reverse_sample",
    "reverse_sample_batch",
]
