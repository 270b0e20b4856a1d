"""Per-frame challenge attributes.

Ten values per frame, split into static attributes of the current frame
and dynamic attributes of two consecutive frames:

========================  =============================================
ratio                     box aspect h/w
relative_scale            sqrt(w*h) / sqrt(W*H), resolution-free
illumination              distance of the color correction vector from
                          neutral (1, 1, 1)
blur                      variance of the Laplacian of the gray box crop
delta_*                   |difference| of the static value between
                          consecutive frames
fast_motion               center motion over sqrt of the larger box area
corrcoef                  Pearson correlation of consecutive gray frames
========================  =============================================

Everything is derived from the original sequence files and ground truth;
no manual annotation enters. Any field can be unavailable (``None``):
absent-target frames carry all-unavailable records, dynamic fields need a
present predecessor, and image-dependent fields (illumination, blur,
corrcoef and their deltas) need pixel data, so annotation-only mode leaves
them unavailable rather than fabricating values.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from . import dataset, imageio, kernels
from .errors import DomainError, LoadError
from .geometry import BoundingBox, FrameRef, Sequence

ATTRIBUTE_NAMES = (
    "ratio",
    "relative_scale",
    "illumination",
    "blur",
    "delta_ratio",
    "delta_relative_scale",
    "delta_illumination",
    "delta_blur",
    "fast_motion",
    "corrcoef",
)

DEFAULT_NORM_ORDER = 6.0
_EPS_CHANNEL = 1e-6


@dataclass(frozen=True)
class AttributeRecord:
    """One frame's attribute values; ``None`` marks unavailable."""

    ratio: Optional[float] = None
    relative_scale: Optional[float] = None
    illumination: Optional[float] = None
    blur: Optional[float] = None
    delta_ratio: Optional[float] = None
    delta_relative_scale: Optional[float] = None
    delta_illumination: Optional[float] = None
    delta_blur: Optional[float] = None
    fast_motion: Optional[float] = None
    corrcoef: Optional[float] = None

    def get(self, name: str) -> Optional[float]:
        return getattr(self, name)


UNAVAILABLE = AttributeRecord()


@dataclass(frozen=True)
class AttributeTable:
    """Ordered per-frame records for one sequence."""

    sequence_id: str
    records: Tuple[AttributeRecord, ...]
    mode: str = "full"  # "full" | "annotation-only"

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> Tuple[Optional[float], ...]:
        return tuple(r.get(name) for r in self.records)


def shades_of_gray_correction(image: np.ndarray, p: float = DEFAULT_NORM_ORDER) -> np.ndarray:
    """Color correction vector mapping the estimated illuminant to neutral.

    The per-channel illuminant is the Minkowski p-mean of the channel; the
    correction divides the illuminant's Euclidean norm (spread over sqrt 3)
    by each channel, so any achromatic image maps exactly to (1, 1, 1).
    A channel that is identically zero is clamped to 1e-6 and warned about.
    """
    if image.ndim != 3 or image.shape[2] != 3 or image.size == 0:
        raise DomainError("correction needs a non-empty HxWx3 image")
    illuminant = kernels.channel_power_means(image, float(p))
    if np.any(illuminant == 0.0):
        warnings.warn("channel identically zero; clamping illuminant", RuntimeWarning)
        illuminant = np.maximum(illuminant, _EPS_CHANNEL)
    # the correction is scale-free in the illuminant; dividing by the first
    # channel first makes achromatic inputs land exactly on (1, 1, 1)
    rel = illuminant / illuminant[0]
    scale = float(np.linalg.norm(rel)) / math.sqrt(3.0)
    return scale / rel


def illumination_value(image: np.ndarray, p: float = DEFAULT_NORM_ORDER) -> float:
    """Distance of the correction vector from neutral (1, 1, 1)."""
    c = shades_of_gray_correction(image, p)
    return float(np.linalg.norm(c - 1.0))


def laplacian_sharpness(gray: np.ndarray) -> Optional[float]:
    """Variance of the 4-neighbor Laplacian response; None below 3x3."""
    v = kernels.laplacian_variance(np.asarray(gray, dtype=np.float64))
    return None if math.isnan(v) else float(v)


def pearson_corrcoef(a: np.ndarray, b: np.ndarray) -> float:
    """Correlation of two grids; b is resampled to a's shape if needed.

    A zero-variance grid makes the quotient undefined; by decision the
    result is 1.0 for identical grids and 0.0 otherwise (warned).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        b = imageio.resize_nearest(b, a.shape[0], a.shape[1])
    if a.size < 2:
        raise DomainError("corrcoef needs at least 2 pixels")
    # constant grids must hit the sigma=0 rule exactly; the kernels' means
    # carry rounding noise that would otherwise fake a tiny variance
    if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        warnings.warn("zero-variance grid in corrcoef", RuntimeWarning)
        return 1.0 if np.array_equal(a, b) else 0.0
    rho = kernels.pearson(a, b)
    if math.isnan(rho):
        warnings.warn("zero-variance grid in corrcoef", RuntimeWarning)
        return 1.0 if np.array_equal(a, b) else 0.0
    return float(rho)


def crop_box(image: np.ndarray, box: BoundingBox) -> np.ndarray:
    """Pixel crop of a box, clamped to the image bounds (warned if clamped)."""
    h, w = image.shape[:2]
    x0, y0 = math.floor(box.x), math.floor(box.y)
    x1, y1 = math.ceil(box.x + box.w), math.ceil(box.y + box.h)
    if x0 < 0 or y0 < 0 or x1 > w or y1 > h:
        warnings.warn(
            f"box ({box.x}, {box.y}, {box.w}, {box.h}) exceeds {w}x{h} image; clamping",
            RuntimeWarning,
        )
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, w), min(y1, h)
    return image[y0:y1, x0:x1]


def static_attributes(
    box: BoundingBox,
    frame: FrameRef,
    image: Optional[np.ndarray] = None,
    p: float = DEFAULT_NORM_ORDER,
) -> Tuple[float, float, Optional[float], Optional[float]]:
    """(ratio, relative_scale, illumination, blur) for one present frame.

    The geometric attributes come from the annotation as-is; illumination
    and blur need the frame image and are None without one.
    """
    if box is None:
        raise DomainError("static attributes are undefined for absent targets")
    if box.w <= 0 or box.h <= 0:
        raise DomainError("box must have positive size")
    ratio = box.h / box.w
    relative_scale = math.sqrt(box.w * box.h) / math.sqrt(frame.width * frame.height)
    if image is None:
        return ratio, relative_scale, None, None
    if image.shape[0] != frame.height or image.shape[1] != frame.width:
        raise DomainError(
            f"frame {frame.index}: image is {image.shape[1]}x{image.shape[0]}, "
            f"expected {frame.width}x{frame.height}"
        )
    illumination = illumination_value(image, p)
    crop = crop_box(image, box)
    blur = None
    if crop.shape[0] >= 3 and crop.shape[1] >= 3:
        # sharpness lives on the 8-bit luma scale so the conventional
        # abnormality bounds keep their magnitude
        blur = laplacian_sharpness(imageio.to_gray(crop) * 255.0)
    return ratio, relative_scale, illumination, blur


def fast_motion_value(prev_box: BoundingBox, curr_box: BoundingBox) -> float:
    """Center displacement normalized by the larger target size.

    The numerator is the Euclidean center distance between the frames;
    the denominator is sqrt(max(w*h)) over the two boxes, which makes the
    value invariant under uniform rescaling of coordinates and sizes.
    """
    d = math.hypot(curr_box.cx - prev_box.cx, curr_box.cy - prev_box.cy)
    return d / math.sqrt(max(prev_box.area, curr_box.area))


def dynamic_attributes(
    prev_static: Tuple[float, float, Optional[float], Optional[float]],
    prev_box: Optional[BoundingBox],
    curr_static: Tuple[float, float, Optional[float], Optional[float]],
    curr_box: Optional[BoundingBox],
    grays: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[Optional[float], ...]:
    """(delta_ratio, delta_relative_scale, delta_illumination, delta_blur,
    fast_motion, corrcoef) between two consecutive frames.

    All six are unavailable when either box is absent; the image-based
    fields additionally need both images (corrcoef) or both static values
    (the deltas).
    """
    if prev_box is None or curr_box is None:
        return (None, None, None, None, None, None)

    def delta(a: Optional[float], b: Optional[float]) -> Optional[float]:
        return None if a is None or b is None else abs(b - a)

    rho = None
    if grays is not None:
        rho = pearson_corrcoef(grays[0], grays[1])
    return (
        delta(prev_static[0], curr_static[0]),
        delta(prev_static[1], curr_static[1]),
        delta(prev_static[2], curr_static[2]),
        delta(prev_static[3], curr_static[3]),
        fast_motion_value(prev_box, curr_box),
        rho,
    )


def annotate_sequence(
    seq: Sequence,
    mode: str = "full",
    p: float = DEFAULT_NORM_ORDER,
) -> AttributeTable:
    """Compute the attribute table for one sequence.

    ``full`` mode reads every frame image; ``annotation-only`` computes the
    geometry-derived attributes and leaves the rest unavailable. The scan
    is sequential within the sequence (dynamic attributes look one frame
    back) while distinct sequences may be annotated in parallel.
    """
    if mode not in ("full", "annotation-only"):
        raise DomainError(f"unknown annotation mode {mode!r}")
    records: List[AttributeRecord] = []
    prev_static = None
    prev_box = None
    prev_gray = None
    for i, (frame, box) in enumerate(zip(seq.frames, seq.groundtruth)):
        image = None
        gray = None
        if mode == "full":
            image = dataset.read_frame(seq, i)
            gray = imageio.to_gray(image)
        if box is None:
            records.append(UNAVAILABLE)
            prev_static, prev_box, prev_gray = None, None, gray
            continue
        static = static_attributes(box, frame, image, p)
        if prev_box is None:
            dyn: Tuple[Optional[float], ...] = (None,) * 6
        else:
            grays = (prev_gray, gray) if gray is not None and prev_gray is not None else None
            dyn = dynamic_attributes(prev_static, prev_box, static, box, grays)
        records.append(
            AttributeRecord(
                ratio=static[0],
                relative_scale=static[1],
                illumination=static[2],
                blur=static[3],
                delta_ratio=dyn[0],
                delta_relative_scale=dyn[1],
                delta_illumination=dyn[2],
                delta_blur=dyn[3],
                fast_motion=dyn[4],
                corrcoef=dyn[5],
            )
        )
        prev_static, prev_box, prev_gray = static, box, gray
    return AttributeTable(sequence_id=seq.id, records=tuple(records), mode=mode)


def format_value(v: Optional[float]) -> str:
    return "" if v is None else format(v, ".9g")


def write_table(table: AttributeTable, path: Union[str, Path]) -> None:
    """Write attributes.csv: header plus one row per frame, 9 significant
    digits, empty cell = unavailable. Output is byte-deterministic."""
    lines = [",".join(ATTRIBUTE_NAMES)]
    for rec in table.records:
        lines.append(",".join(format_value(rec.get(n)) for n in ATTRIBUTE_NAMES))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode())


def read_table(path: Union[str, Path], mode: str = "full") -> AttributeTable:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != ",".join(ATTRIBUTE_NAMES):
        raise LoadError(f"{path}: missing or wrong attribute header")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(ATTRIBUTE_NAMES):
            raise LoadError(f"{path}:{lineno}: expected {len(ATTRIBUTE_NAMES)} cells")
        values = {}
        for name, cell in zip(ATTRIBUTE_NAMES, cells):
            if cell == "":
                values[name] = None
            else:
                try:
                    values[name] = float(cell)
                except ValueError as exc:
                    raise LoadError(f"{path}:{lineno}: bad number {cell!r}") from exc
        records.append(AttributeRecord(**values))
    return AttributeTable(
        sequence_id=path.parent.name or path.stem,
        records=tuple(records),
        mode=mode,
    )
