"""Source-format adapters: convert benchmark layouts to canonical form.

Each adapter maps one benchmark convention onto (boxes, absence) lists.
Conversions run once at import: either in memory via
:func:`load_annotations` or materialized on disk with
:func:`materialize_canonical` so a tree only ever needs adapting once.

vot
    ``groundtruth.txt``, one row per frame of either 4 values (x,y,w,h) or
    8 values (a free polygon); polygons are reduced to their axis-aligned
    hull box.
lasot
    ``groundtruth.txt`` with x,y,w,h rows plus ``full_occlusion.txt`` and
    ``out_of_view.txt`` (single comma-separated 0/1 rows); a frame flagged
    in either file becomes target-absent.
"""

from __future__ import annotations

import shutil
from pathlib import Path
from typing import List, Tuple, Union

from .errors import LoadError

Row = Tuple[float, float, float, float]

FORMATS = ("canonical", "vot", "lasot")


def load_annotations(directory: Path, fmt: str) -> Tuple[List[Row], List[bool]]:
    if fmt == "vot":
        return _load_vot(directory)
    if fmt == "lasot":
        return _load_lasot(directory)
    raise LoadError(f"{directory}: unknown source format {fmt!r}")


def _split_numbers(line: str, path: Path, lineno: int) -> List[float]:
    try:
        return [float(v) for v in line.replace("\t", ",").split(",")]
    except ValueError as exc:
        raise LoadError(f"{path}:{lineno}: unparsable row {line!r}") from exc


def polygon_hull_box(points: List[float]) -> Row:
    """Axis-aligned hull of a flat [x1, y1, x2, y2, ...] polygon."""
    xs, ys = points[0::2], points[1::2]
    x, y = min(xs), min(ys)
    return (x, y, max(xs) - x, max(ys) - y)


def _load_vot(directory: Path) -> Tuple[List[Row], List[bool]]:
    gt = directory / "groundtruth.txt"
    if not gt.is_file():
        raise LoadError(f"{gt} is missing")
    boxes: List[Row] = []
    absent: List[bool] = []
    for i, line in enumerate(gt.read_text(encoding="utf-8").splitlines()):
        values = _split_numbers(line, gt, i + 1)
        if any(v != v for v in values):  # NaN row marks absence
            boxes.append((0.0, 0.0, 0.0, 0.0))
            absent.append(True)
        elif len(values) == 4:
            boxes.append(tuple(values))  # type: ignore[arg-type]
            absent.append(False)
        elif len(values) == 8:
            boxes.append(polygon_hull_box(values))
            absent.append(False)
        else:
            raise LoadError(f"{gt}:{i + 1}: expected 4 or 8 values, got {len(values)}")
    return boxes, absent


def _read_flag_row(path: Path, n: int) -> List[bool]:
    if not path.is_file():
        return [False] * n
    raw = path.read_text(encoding="utf-8").strip().replace("\n", ",")
    flags = [v.strip() for v in raw.split(",") if v.strip()]
    if len(flags) != n:
        raise LoadError(f"{path}: {len(flags)} flags for {n} frames")
    return [f == "1" for f in flags]


def _load_lasot(directory: Path) -> Tuple[List[Row], List[bool]]:
    gt = directory / "groundtruth.txt"
    if not gt.is_file():
        raise LoadError(f"{gt} is missing")
    boxes: List[Row] = []
    for i, line in enumerate(gt.read_text(encoding="utf-8").splitlines()):
        values = _split_numbers(line, gt, i + 1)
        if len(values) != 4:
            raise LoadError(f"{gt}:{i + 1}: expected 4 values, got {len(values)}")
        boxes.append(tuple(values))  # type: ignore[arg-type]
    occ = _read_flag_row(directory / "full_occlusion.txt", len(boxes))
    oov = _read_flag_row(directory / "out_of_view.txt", len(boxes))
    absent = [a or b for a, b in zip(occ, oov)]
    return boxes, absent


def materialize_canonical(
    src: Union[str, Path],
    fmt: str,
    dst: Union[str, Path],
    link_frames: bool = True,
) -> None:
    """Write a canonical copy of a source-format sequence directory.

    Frame images are symlinked when possible (copied on filesystems that
    refuse symlinks) so large datasets are not duplicated.
    """
    src, dst = Path(src), Path(dst)
    boxes, absent = load_annotations(src, fmt)
    dst.mkdir(parents=True, exist_ok=True)
    rows = []
    for (x, y, w, h), is_absent in zip(boxes, absent):
        if is_absent:
            rows.append("0,0,0,0")
        else:
            rows.append(",".join(format(v, ".9g") for v in (x, y, w, h)))
    (dst / "groundtruth.csv").write_bytes(("\n".join(rows) + "\n").encode())
    if any(absent):
        (dst / "absence.csv").write_bytes(
            ("\n".join("1" if a else "0" for a in absent) + "\n").encode()
        )
    src_frames = src / "frames"
    if src_frames.is_dir():
        dst_frames = dst / "frames"
        if not dst_frames.exists():
            try:
                dst_frames.symlink_to(src_frames.resolve(), target_is_directory=True)
            except OSError:
                shutil.copytree(src_frames, dst_frames)
    elif (src / "meta.json").is_file():
        shutil.copy(src / "meta.json", dst / "meta.json")
