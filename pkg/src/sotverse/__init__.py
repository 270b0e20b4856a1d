"""Toolkit for user-defined single-object-tracking evaluation spaces.

Pipeline: annotate per-frame challenge attributes, calibrate abnormality
thresholds, mine challenging subsequences, evaluate trackers under OPE or
restart-enabled OPE over a line protocol, score with the metric suite, and
serve results through a minimal submission/leaderboard service.
"""

from .geometry import (
    BoundingBox,
    Environment,
    FrameRef,
    Sequence,
    TaskSpec,
    center_distance,
    iou,
    normalized_center_distance,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Environment",
    "FrameRef",
    "Sequence",
    "TaskSpec",
    "center_distance",
    "iou",
    "normalized_center_distance",
    "__version__",
]
