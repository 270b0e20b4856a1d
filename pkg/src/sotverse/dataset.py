"""Dataset ingestion: manifests, the canonical on-disk layout, statistics.

Canonical layout per sequence directory::

    groundtruth.csv   one "x,y,w,h" row per frame, decimal reals, no header
    absence.csv       optional, one 0|1 per frame (1 = target absent)
    frames/           images with zero-padded numeric names (000000.ppm ...)
    meta.json         optional {"width": W, "height": H} for annotation-only
                      mode (no frames/ directory)

Ground-truth rows of absence-marked frames are placeholders and ignored;
a degenerate row (w or h <= 0) on a frame marked present is rejected
rather than coerced. An environment manifest is UTF-8 JSON (schema 1)
listing sequence directories plus optional expected statistics; loading
validates everything up front and fails atomically, touching annotation
files only -- pixels stay untouched until attributes ask for them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from . import adapters, imageio
from .errors import DomainError, LoadError
from .geometry import BoundingBox, Environment, FrameRef, Sequence

MANIFEST_SCHEMA = 1
IMAGE_SUFFIXES = (".ppm", ".pgm", ".png", ".jpg", ".jpeg", ".bmp")


@dataclass(frozen=True)
class SummaryStats:
    """Dataset statistics in the shape of published benchmark tables."""

    videos: int
    min_frames: int
    max_frames: int
    total_frames: int
    mean_exact: Fraction
    absent_frames: int

    @property
    def mean_frames(self) -> int:
        """Mean sequence length rounded half-to-even for display."""
        num, den = self.mean_exact.numerator, self.mean_exact.denominator
        return round(Fraction(num, den))  # Fraction.__round__ is half-even


def _parse_box_row(row: str, path: Path, lineno: int) -> Tuple[float, float, float, float]:
    parts = row.split(",")
    if len(parts) != 4:
        raise LoadError(f"{path}:{lineno}: expected 4 comma-separated values, got {row!r}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError as exc:
        raise LoadError(f"{path}:{lineno}: unparsable number in {row!r}") from exc


def _read_absence(path: Path, n_frames: int) -> List[bool]:
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) != n_frames:
        raise LoadError(f"{path}: {len(lines)} rows for {n_frames} frames")
    out = []
    for i, line in enumerate(lines):
        v = line.strip()
        if v not in ("0", "1"):
            raise LoadError(f"{path}:{i + 1}: expected 0 or 1, got {v!r}")
        out.append(v == "1")
    if out and out[0]:
        raise LoadError(f"{path}: frame 0 must not be absent")
    return out


def _list_frames(frames_dir: Path) -> List[Path]:
    files = sorted(
        p for p in frames_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not files:
        raise LoadError(f"{frames_dir}: no frame images found")
    return files


def load_sequence(
    directory: Union[str, Path],
    fmt: str = "canonical",
    seq_id: Optional[str] = None,
    dataset_id: str = "",
) -> Sequence:
    """Load one sequence directory in the given source format.

    Non-canonical formats are adapted in memory to the canonical
    representation; see :mod:`sotverse.adapters`.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise LoadError(f"sequence directory {directory} does not exist")
    seq_id = seq_id or directory.name

    if fmt == "canonical":
        boxes, absent = _load_canonical_annotations(directory)
    else:
        boxes, absent = adapters.load_annotations(directory, fmt)

    n = len(boxes)
    frames_dir = directory / "frames"
    meta_path = directory / "meta.json"
    frames: List[FrameRef] = []
    if frames_dir.is_dir():
        files = _list_frames(frames_dir)
        if len(files) != n:
            raise LoadError(
                f"{directory}: {len(files)} frame images vs {n} ground-truth rows"
            )
        for i, f in enumerate(files):
            w, h = imageio.image_size(f)
            frames.append(FrameRef(seq_id, i, str(Path("frames") / f.name), w, h))
    elif meta_path.is_file():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        try:
            w, h = int(meta["width"]), int(meta["height"])
        except (KeyError, TypeError, ValueError) as exc:
            raise LoadError(f"{meta_path}: needs integer width and height") from exc
        frames = [
            FrameRef(seq_id, i, str(Path("frames") / f"{i:06d}.ppm"), w, h)
            for i in range(n)
        ]
    else:
        raise LoadError(f"{directory}: needs a frames/ directory or meta.json")

    groundtruth: List[Optional[BoundingBox]] = []
    for i, (row, is_absent) in enumerate(zip(boxes, absent)):
        if is_absent:
            groundtruth.append(None)
            continue
        x, y, w, h = row
        if w <= 0 or h <= 0:
            raise LoadError(
                f"{directory}: frame {i} marked present but has degenerate size {w}x{h}"
            )
        groundtruth.append(BoundingBox(x, y, w, h))
    try:
        return Sequence(
            id=seq_id,
            frames=tuple(frames),
            groundtruth=tuple(groundtruth),
            dataset_id=dataset_id,
            root=str(directory),
        )
    except DomainError as exc:
        raise LoadError(f"{directory}: {exc}") from exc


def _load_canonical_annotations(directory: Path):
    gt_path = directory / "groundtruth.csv"
    if not gt_path.is_file():
        raise LoadError(f"{gt_path} is missing")
    lines = gt_path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise LoadError(f"{gt_path} is empty")
    boxes = [_parse_box_row(line, gt_path, i + 1) for i, line in enumerate(lines)]
    absence_path = directory / "absence.csv"
    if absence_path.is_file():
        absent = _read_absence(absence_path, len(boxes))
    else:
        absent = [False] * len(boxes)
    return boxes, absent


def write_sequence(seq: Sequence, directory: Union[str, Path]) -> None:
    """Write annotations in canonical form (bit-exact CSV, LF endings).

    Images are not copied; a meta.json records the resolution so the
    written tree loads in annotation-only mode. Round-trips are
    value-identical on ground truth and absence.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for g in seq.groundtruth:
        if g is None:
            rows.append("0,0,0,0")
        else:
            rows.append(",".join(format(v, ".9g") for v in g.as_tuple()))
    (directory / "groundtruth.csv").write_bytes(("\n".join(rows) + "\n").encode())
    if any(g is None for g in seq.groundtruth):
        flags = "\n".join("1" if g is None else "0" for g in seq.groundtruth)
        (directory / "absence.csv").write_bytes((flags + "\n").encode())
    meta = {"width": seq.frames[0].width, "height": seq.frames[0].height}
    (directory / "meta.json").write_bytes(
        (json.dumps(meta, sort_keys=True) + "\n").encode()
    )


def slice_sequence(seq: Sequence, start: int, end: int, new_id: Optional[str] = None) -> Sequence:
    """A [start, end) window of a sequence as a standalone sequence.

    Frame indices are rebased to zero; image paths and resolutions are
    kept. The window must begin on a present-target frame.
    """
    if not (0 <= start < end <= len(seq)):
        raise DomainError(f"bad slice [{start}, {end}) of {len(seq)}-frame sequence")
    frames = tuple(
        FrameRef(seq.id, i, f.image_path, f.width, f.height)
        for i, f in enumerate(seq.frames[start:end])
    )
    return Sequence(
        id=new_id or f"{seq.id}_{start:06d}_{end:06d}",
        frames=frames,
        groundtruth=seq.groundtruth[start:end],
        dataset_id=seq.dataset_id,
        root=seq.root,
    )


def load_manifest(path: Union[str, Path]) -> Environment:
    """Load an environment manifest and validate it atomically.

    Checks: schema version, unique sequence ids, every directory present,
    and -- when the manifest carries an expected-statistics block -- that
    the loaded environment reproduces the published numbers exactly.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot parse manifest {path}: {exc}") from exc
    if doc.get("schema") != MANIFEST_SCHEMA:
        raise LoadError(f"{path}: unsupported manifest schema {doc.get('schema')!r}")
    env_id = doc.get("id")
    kind = doc.get("kind", "normal")
    entries = doc.get("sequences")
    if not env_id or not isinstance(entries, list) or not entries:
        raise LoadError(f"{path}: manifest needs an id and a non-empty sequence list")

    seen: Dict[str, int] = {}
    sequences: List[Sequence] = []
    for entry in entries:
        seq_id = entry.get("id")
        directory = entry.get("dir")
        fmt = entry.get("format", "canonical")
        if not seq_id or not directory:
            raise LoadError(f"{path}: sequence entry missing id or dir: {entry!r}")
        if seq_id in seen:
            raise LoadError(f"{path}: duplicate sequence id {seq_id!r}")
        seen[seq_id] = 1
        seq_dir = Path(directory)
        if not seq_dir.is_absolute():
            seq_dir = path.parent / seq_dir
        if not seq_dir.is_dir():
            raise LoadError(f"{path}: sequence {seq_id!r}: directory {seq_dir} missing")
        sequences.append(
            load_sequence(seq_dir, fmt, seq_id, entry.get("dataset", env_id))
        )

    provenance = tuple(sorted({s.dataset_id for s in sequences}))
    env = Environment(id=env_id, kind=kind, sequences=tuple(sequences), provenance=provenance)

    stats = doc.get("stats")
    if stats is not None:
        _check_stats(env, stats, path)
    return env


def _check_stats(env: Environment, stats: dict, path: Path) -> None:
    actual = dataset_summary(env)
    expected = {
        "videos": actual.videos,
        "min_frames": actual.min_frames,
        "mean_frames": actual.mean_frames,
        "max_frames": actual.max_frames,
        "total_frames": actual.total_frames,
    }
    for key, want in stats.items():
        if key not in expected:
            raise LoadError(f"{path}: unknown stats key {key!r}")
        if expected[key] != want:
            raise LoadError(
                f"{path}: stats mismatch for {key}: manifest says {want}, "
                f"loaded data gives {expected[key]}"
            )


def dataset_summary(env: Environment) -> SummaryStats:
    """Exact count/min/mean/max/total statistics of an environment."""
    lengths = [len(s) for s in env.sequences]
    if not lengths:
        raise DomainError("empty environment has no summary")
    absent = sum(sum(1 for g in s.groundtruth if g is None) for s in env.sequences)
    return SummaryStats(
        videos=len(lengths),
        min_frames=min(lengths),
        max_frames=max(lengths),
        total_frames=sum(lengths),
        mean_exact=Fraction(sum(lengths), len(lengths)),
        absent_frames=absent,
    )


def image_path(seq: Sequence, index: int) -> str:
    """Absolute path of a frame image, resolving the sequence root."""
    rel = seq.frames[index].image_path
    if seq.root is None:
        return rel
    return str(Path(seq.root) / rel)


def read_frame(seq: Sequence, index: int):
    """Decode one frame image as float64 HxWx3 in [0, 1]."""
    try:
        return imageio.read_image(image_path(seq, index))
    except LoadError as exc:
        raise LoadError(f"sequence {seq.id}, frame {index}: {exc}") from exc
