"""Challenging-space construction: screening plus deduplication.

For one attribute, a sequence window is *challenging* when at least half
of its frames carry the attribute's challenge flag. Mining runs in two
steps per sequence:

1. screening -- every eligible start point is extended to the furthest
   end that keeps the window half-challenging (ends shrink from the
   sequence end until the density condition holds, computed here in
   O(n + starts) via an integer transform; output is identical to the
   literal shrink loop and is verified against it in the tests);
2. deduplication -- candidates are ordered by length descending (ties:
   earlier start first); a candidate is dropped when it is shorter than
   100 frames or when at least half of it is covered by an already kept
   baseline, and kept as a new baseline otherwise.

Start points are frames where (re-)initialization is sensible: present
target, large and sharp enough, and not immediately followed by a target
absence. The same start points anchor restart-enabled evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Mapping, Optional, Sequence as Seq, Tuple, Union

import numpy as np

from . import kernels
from .attributes import ATTRIBUTE_NAMES, AttributeTable
from .calibration import ChallengeFlags, ThresholdSet, classify_table
from .errors import ConfigError, DomainError, LoadError
from .geometry import Environment, Sequence

SUBSPACE_SCHEMA = 1
MIN_SUBSEQUENCE_FRAMES = 100
MIN_CHALLENGE_DENSITY = 0.5
DEDUP_OVERLAP = 0.5


@dataclass(frozen=True)
class StartPointPolicy:
    """Quality gates for (re-)initialization frames.

    The defaults reuse the shipped abnormal bounds: a start must not be a
    tiny (relative scale below 0.02) or blurred (sharpness below 95)
    target, and no absence may follow within the margin.
    """

    min_scale: float = 0.02
    min_sharpness: float = 95.0
    absence_margin: int = 10


DEFAULT_START_POLICY = StartPointPolicy()


@dataclass(frozen=True)
class StartPointList:
    sequence_id: str
    points: Tuple[int, ...]

    def __post_init__(self):
        if list(self.points) != sorted(set(self.points)):
            raise DomainError("start points must be sorted and unique")


@dataclass(frozen=True)
class SubsequenceRef:
    """A mined window [start, end) of one sequence."""

    sequence_id: str
    start: int
    end: int
    attribute: str
    challenge_density: float

    def __post_init__(self):
        if self.end <= self.start:
            raise DomainError(f"empty subsequence [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Subspace:
    """All mined subsequences of one attribute over an environment."""

    attribute: str
    refs: Tuple[SubsequenceRef, ...]
    threshold_set_id: str = "default"
    environment_id: str = ""

    def __len__(self) -> int:
        return len(self.refs)


@dataclass(frozen=True)
class Candidate:
    start: int
    end: int
    density: float

    @property
    def length(self) -> int:
        return self.end - self.start


def find_start_points(
    seq: Sequence,
    table: AttributeTable,
    policy: StartPointPolicy = DEFAULT_START_POLICY,
) -> StartPointList:
    """Frames eligible for (re-)initialization under the quality policy.

    A frame qualifies when the target is present, its relative scale
    reaches ``min_scale``, its sharpness reaches ``min_sharpness`` (the
    test is skipped when sharpness is unavailable), and no absent frame
    occurs within ``absence_margin`` frames after it.
    """
    if len(table) != len(seq):
        raise DomainError(f"attribute table length {len(table)} != sequence {len(seq)}")
    absent = seq.absent
    n = len(seq)
    points = []
    for t in range(n):
        if absent[t]:
            continue
        rec = table.records[t]
        if rec.relative_scale is None or rec.relative_scale < policy.min_scale:
            continue
        if rec.blur is not None and rec.blur < policy.min_sharpness:
            continue
        window = absent[t + 1 : min(n, t + 1 + policy.absence_margin)]
        if any(window):
            continue
        points.append(t)
    return StartPointList(sequence_id=seq.id, points=tuple(points))


def screen_subsequences(
    flags_column: Seq[bool],
    starts: StartPointList,
) -> List[Candidate]:
    """For each start, the longest window that stays half-challenging.

    At most one candidate per start; short candidates are kept here (the
    length cut is deduplication's job).
    """
    flag_arr = np.asarray(flags_column, dtype=np.uint8)
    start_arr = np.asarray(starts.points, dtype=np.int64)
    ends = kernels.screen_max_ends(flag_arr, start_arr)
    prefix = np.concatenate(([0], np.cumsum(flag_arr, dtype=np.int64)))
    out = []
    for a, b in zip(start_arr.tolist(), np.asarray(ends).tolist()):
        if b < 0:
            continue
        out.append(Candidate(a, b, (prefix[b] - prefix[a]) / (b - a)))
    return out


def overlap_ratio(a: Candidate, b: Candidate) -> float:
    """|a intersect b| / |a| for two windows of the same sequence."""
    inter = min(a.end, b.end) - max(a.start, b.start)
    return max(inter, 0) / a.length


def deduplicate(
    candidates: Seq[Candidate],
    min_length: int = MIN_SUBSEQUENCE_FRAMES,
    max_overlap: float = DEDUP_OVERLAP,
) -> List[Candidate]:
    """Keep a maximal set of long, mostly novel windows.

    Candidates are visited longest first (ties: earlier start). One is
    discarded when it is shorter than ``min_length`` or when the fraction
    of it covered by any kept baseline reaches ``max_overlap``.
    """
    kept: List[Candidate] = []
    for cand in sorted(candidates, key=lambda c: (-c.length, c.start)):
        if cand.length < min_length:
            continue
        if any(overlap_ratio(cand, base) >= max_overlap for base in kept):
            continue
        kept.append(cand)
    return kept


def mine_sequence(
    seq: Sequence,
    table: AttributeTable,
    flags: ChallengeFlags,
    attribute: str,
    start_policy: StartPointPolicy = DEFAULT_START_POLICY,
    min_length: int = MIN_SUBSEQUENCE_FRAMES,
) -> List[SubsequenceRef]:
    starts = find_start_points(seq, table, start_policy)
    candidates = screen_subsequences(flags.column(attribute), starts)
    kept = deduplicate(candidates, min_length=min_length)
    kept.sort(key=lambda c: c.start)
    return [
        SubsequenceRef(seq.id, c.start, c.end, attribute, c.density) for c in kept
    ]


def construct_subspace(
    env: Environment,
    attribute: str,
    thresholds: ThresholdSet,
    tables: Mapping[str, AttributeTable],
    start_policy: StartPointPolicy = DEFAULT_START_POLICY,
    min_length: int = MIN_SUBSEQUENCE_FRAMES,
) -> Subspace:
    """Mine one attribute's challenging space over a whole environment."""
    if attribute not in ATTRIBUTE_NAMES:
        raise ConfigError(f"unknown attribute {attribute!r}")
    refs: List[SubsequenceRef] = []
    for seq in env.sequences:
        table = tables.get(seq.id)
        if table is None:
            raise LoadError(f"no attribute table for sequence {seq.id!r}")
        flags = classify_table(table, thresholds)
        refs.extend(mine_sequence(seq, table, flags, attribute, start_policy, min_length))
    return Subspace(
        attribute=attribute,
        refs=tuple(refs),
        threshold_set_id=thresholds.id,
        environment_id=env.id,
    )


def write_subspace(subspace: Subspace, path: Union[str, Path]) -> None:
    doc = {
        "schema": SUBSPACE_SCHEMA,
        "attribute": subspace.attribute,
        "threshold_set_id": subspace.threshold_set_id,
        "environment_id": subspace.environment_id,
        "refs": [
            {
                "sequence": r.sequence_id,
                "start": r.start,
                "end": r.end,
                "density": round(r.challenge_density, 9),
            }
            for r in subspace.refs
        ],
    }
    Path(path).write_bytes((json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())


def read_subspace(path: Union[str, Path]) -> Subspace:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot parse subspace {path}: {exc}") from exc
    if doc.get("schema") != SUBSPACE_SCHEMA:
        raise LoadError(f"{path}: unsupported subspace schema {doc.get('schema')!r}")
    try:
        refs = tuple(
            SubsequenceRef(
                sequence_id=r["sequence"],
                start=int(r["start"]),
                end=int(r["end"]),
                attribute=doc["attribute"],
                challenge_density=float(r.get("density", 1.0)),
            )
            for r in doc["refs"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"{path}: bad subsequence entry: {exc}") from exc
    return Subspace(
        attribute=doc["attribute"],
        refs=refs,
        threshold_set_id=doc.get("threshold_set_id", "default"),
        environment_id=doc.get("environment_id", ""),
    )


@dataclass(frozen=True)
class SpaceEntry:
    """One unit of evaluation: a full sequence or a mined window."""

    id: str
    sequence_id: str
    start: int
    end: int  # exclusive; -1 means "to the end of the sequence"


def entry_id(sequence_id: str, start: int, end: int) -> str:
    return f"{sequence_id}_{start:06d}_{end:06d}"


def resolve_space(
    env: Environment,
    space_path: Optional[Union[str, Path]] = None,
) -> Tuple[str, List[SpaceEntry]]:
    """Resolve what gets evaluated: a subspace file or the whole environment.

    Returns (space id, entries). Without a space file every sequence of
    the environment is one entry under its own id.
    """
    if space_path is None:
        entries = [SpaceEntry(s.id, s.id, 0, len(s)) for s in env.sequences]
        return env.id, entries
    sub = read_subspace(space_path)
    entries = []
    for r in sub.refs:
        seq = env.sequence(r.sequence_id)  # raises KeyError for dangling refs
        if r.end > len(seq):
            raise LoadError(
                f"subspace ref {r.sequence_id}[{r.start}:{r.end}) exceeds "
                f"sequence length {len(seq)}"
            )
        entries.append(SpaceEntry(entry_id(r.sequence_id, r.start, r.end), r.sequence_id, r.start, r.end))
    space_id = f"{sub.environment_id or env.id}-{sub.attribute}"
    return space_id, entries
