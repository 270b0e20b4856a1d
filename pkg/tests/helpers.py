"""Small builders shared across test modules."""

from __future__ import annotations

from typing import Optional, Sequence as Seq, Tuple

import numpy as np

from sotverse.geometry import BoundingBox, FrameRef, Sequence


def memory_sequence(
    boxes: Seq[Optional[Tuple[float, float, float, float]]],
    width: int = 64,
    height: int = 48,
    seq_id: str = "mem",
) -> Sequence:
    """An annotation-only in-memory sequence (image paths are stubs)."""
    frames = tuple(
        FrameRef(seq_id, i, f"frames/{i:06d}.ppm", width, height)
        for i in range(len(boxes))
    )
    gt = tuple(None if b is None else BoundingBox(*b) for b in boxes)
    return Sequence(id=seq_id, frames=frames, groundtruth=gt)


def write_image_sequence(
    root,
    name: str,
    images: Seq[np.ndarray],
    boxes: Seq[Optional[Tuple[float, float, float, float]]],
):
    """Write a canonical sequence directory with the given uint8 frames."""
    from sotverse import imageio

    seq_dir = root / name
    (seq_dir / "frames").mkdir(parents=True)
    rows = []
    for i, (img, box) in enumerate(zip(images, boxes)):
        imageio.write_ppm(seq_dir / "frames" / f"{i:06d}.ppm", img)
        rows.append("0,0,0,0" if box is None else ",".join(format(v, ".9g") for v in box))
    (seq_dir / "groundtruth.csv").write_text("\n".join(rows) + "\n")
    if any(b is None for b in boxes):
        (seq_dir / "absence.csv").write_text(
            "\n".join("1" if b is None else "0" for b in boxes) + "\n"
        )
    return seq_dir
