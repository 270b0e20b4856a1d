"""Geometry primitives and the shared vocabulary of the toolkit.

A target region is an axis-aligned :class:`BoundingBox`; a frame where the
target is absent is represented by ``None`` wherever a box-or-absent value
is expected. All types here are immutable values and all operations are
pure functions, so they are safe to use from any number of workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence as Seq, Tuple

from .errors import ConfigError, DomainError

MECHANISMS = ("ope", "rope")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box: top-left corner (x, y) plus width and height.

    Coordinates are continuous reals, not integer pixels; a present box
    always has positive width and height.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise DomainError(f"box must have positive size, got w={self.w}, h={self.h}")

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class FrameRef:
    """One frame of a sequence: image location and resolution."""

    sequence_id: str
    index: int
    image_path: str
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise DomainError(f"frame {self.index}: resolution must be positive")


@dataclass(frozen=True)
class Sequence:
    """Frames plus per-frame ground truth (box or ``None`` when absent)."""

    id: str
    frames: Tuple[FrameRef, ...]
    groundtruth: Tuple[Optional[BoundingBox], ...]
    dataset_id: str = ""
    root: Optional[str] = None  # directory image paths are relative to

    def __post_init__(self):
        if len(self.frames) != len(self.groundtruth):
            raise DomainError(
                f"sequence {self.id}: {len(self.frames)} frames vs "
                f"{len(self.groundtruth)} ground-truth rows"
            )
        if not self.frames:
            raise DomainError(f"sequence {self.id} is empty")
        if self.groundtruth[0] is None:
            raise DomainError(f"sequence {self.id}: first frame has no target")
        for i, f in enumerate(self.frames):
            if f.index != i:
                raise DomainError(f"sequence {self.id}: frame indices not contiguous at {i}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def absent(self) -> Tuple[bool, ...]:
        return tuple(g is None for g in self.groundtruth)


@dataclass
class Environment:
    """A named collection of sequences (a normal or challenging space)."""

    id: str
    kind: str  # "normal" | "challenging"
    sequences: Tuple[Sequence, ...]
    provenance: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("normal", "challenging"):
            raise DomainError(f"environment kind must be normal|challenging, got {self.kind!r}")
        if not self.sequences:
            raise DomainError(f"environment {self.id} is empty")

    def __iter__(self):
        return iter(self.sequences)

    def __len__(self) -> int:
        return len(self.sequences)

    def sequence(self, seq_id: str) -> Sequence:
        for s in self.sequences:
            if s.id == seq_id:
                return s
        raise KeyError(seq_id)


@dataclass(frozen=True)
class TaskSpec:
    """A subtask as configuration: environment x mechanisms x indicators x executors."""

    environment_id: str
    mechanisms: Tuple[str, ...]
    indicators: Tuple[str, ...]
    executors: Tuple[str, ...] = ()

    def validate(self, indicator_registry: Seq[str]) -> None:
        for m in self.mechanisms:
            if m not in MECHANISMS:
                raise ConfigError(f"unknown mechanism {m!r}; expected one of {MECHANISMS}")
        for ind in self.indicators:
            if ind not in indicator_registry:
                raise ConfigError(f"unknown indicator {ind!r}")
        if not self.mechanisms:
            raise ConfigError("task spec needs at least one mechanism")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two present boxes, in [0, 1].

    Uses exact area arithmetic on the continuous coordinates. Raises
    :class:`DomainError` on an absent operand: callers must filter
    absent frames before scoring.
    """
    if a is None or b is None:
        raise DomainError("iou is undefined for absent boxes")
    if a == b:  # exact identity; the formula can lose an ulp at binade edges
        return 1.0
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    # the quotient cannot exceed 1 mathematically; clamp rounding noise
    return min(1.0, inter / (a.area + b.area - inter))


def center_distance(p: BoundingBox, g: BoundingBox) -> float:
    """Euclidean distance between the centers of two present boxes."""
    if p is None or g is None:
        raise DomainError("center_distance is undefined for absent boxes")
    return math.hypot(p.cx - g.cx, p.cy - g.cy)


def normalized_center_distance(p: BoundingBox, g: BoundingBox) -> float:
    """Center distance with each axis divided by the ground-truth size.

    The x offset is divided by g.w and the y offset by g.h before taking
    the Euclidean norm, so the value is invariant under uniform rescaling
    of both boxes.
    """
    if p is None or g is None:
        raise DomainError("normalized_center_distance is undefined for absent boxes")
    return math.hypot((p.cx - g.cx) / g.w, (p.cy - g.cy) / g.h)
