"""Minimal image reading for attribute computation.

Frames are pre-extracted image files. PPM/PGM are parsed natively so the
core pipeline and its fixtures have no imaging dependency; anything else
(PNG, JPEG, ...) is delegated to Pillow when installed. Images come back
as float64 HxWx3 arrays in [0, 1] -- grayscale sources are expanded to
three equal channels, which makes their illuminant correction exactly
neutral.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .errors import LoadError

GRAY_WEIGHTS = (0.299, 0.587, 0.114)

_PNM_HEADER = re.compile(rb"^(P[56])\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s")


def _parse_pnm(data: bytes, path: str) -> np.ndarray:
    m = _PNM_HEADER.match(data)
    if not m:
        raise LoadError(f"{path}: not a binary PPM/PGM file")
    magic, w, h, maxval = m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4))
    if maxval != 255:
        raise LoadError(f"{path}: only 8-bit PNM supported, maxval={maxval}")
    channels = 3 if magic == b"P6" else 1
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=m.end())
    if pixels.size != w * h * channels:
        raise LoadError(f"{path}: truncated pixel data")
    return pixels.reshape(h, w, channels) if channels == 3 else pixels.reshape(h, w)


def read_image(path: Union[str, Path]) -> np.ndarray:
    """Read an image file as float64 HxWx3 in [0, 1]."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pgm"):
        try:
            raw = _parse_pnm(path.read_bytes(), str(path))
        except OSError as exc:
            raise LoadError(f"cannot read image {path}: {exc}") from exc
    else:
        try:
            from PIL import Image
        except ImportError as exc:
            raise LoadError(
                f"cannot read {path}: install the 'image' extra (Pillow) for non-PNM formats"
            ) from exc
        try:
            with Image.open(path) as im:
                raw = np.asarray(im.convert("RGB"))
        except OSError as exc:
            raise LoadError(f"cannot read image {path}: {exc}") from exc
    arr = raw.astype(np.float64) / 255.0
    if arr.ndim == 2:
        arr = np.stack([arr, arr, arr], axis=-1)
    return arr


def image_size(path: Union[str, Path]) -> Tuple[int, int]:
    """(width, height) of an image without decoding the pixel data."""
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pgm"):
        try:
            with open(path, "rb") as fh:
                head = fh.read(128)
        except OSError as exc:
            raise LoadError(f"cannot read image {path}: {exc}") from exc
        m = _PNM_HEADER.match(head)
        if not m:
            raise LoadError(f"{path}: not a binary PPM/PGM file")
        return int(m.group(2)), int(m.group(3))
    try:
        from PIL import Image
    except ImportError as exc:
        raise LoadError(
            f"cannot read {path}: install the 'image' extra (Pillow) for non-PNM formats"
        ) from exc
    try:
        with Image.open(path) as im:
            return im.size
    except OSError as exc:
        raise LoadError(f"cannot read image {path}: {exc}") from exc


def write_ppm(path: Union[str, Path], pixels: np.ndarray) -> None:
    """Write a uint8 HxWx3 array as binary PPM."""
    a = np.asarray(pixels)
    if a.dtype != np.uint8 or a.ndim != 3 or a.shape[2] != 3:
        raise ValueError("write_ppm expects a uint8 HxWx3 array")
    h, w = a.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(a.tobytes())


def to_gray(img: np.ndarray) -> np.ndarray:
    """Luma grayscale (0.299, 0.587, 0.114) of an HxWx3 array."""
    return (
        GRAY_WEIGHTS[0] * img[:, :, 0]
        + GRAY_WEIGHTS[1] * img[:, :, 1]
        + GRAY_WEIGHTS[2] * img[:, :, 2]
    )


def resize_nearest(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Nearest-neighbor resample, deterministic across platforms."""
    h, w = img.shape[:2]
    rows = np.minimum(((np.arange(height) + 0.5) * h / height).astype(np.int64), h - 1)
    cols = np.minimum(((np.arange(width) + 0.5) * w / width).astype(np.int64), w - 1)
    return img[rows][:, cols]
