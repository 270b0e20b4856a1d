"""Evaluation engine: drive a tracker over sequences under OPE or R-OPE.

OPE initializes once on frame 0 and records a prediction for every later
frame. R-OPE initializes on the first start point (every init lands on a
start point) and watches the overlap between prediction and ground
truth: once the tracker has failed (overlap below the threshold) on ten
consecutive evaluated frames, it is re-initialized at the next start
point after the frame where the failure was detected; the frames in
between are skipped. Frames without ground truth are invisible to the
failure counter. If no later start point exists the run ends and the
remaining frames are skipped.

Sessions talk to trackers through :mod:`sotverse.protocol` channels
(subprocess or TCP) or through the in-process :class:`ScriptedSession`
used for offline replay and testing. One session is strictly sequential;
run distinct sequences in distinct sessions for parallelism.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

from .errors import DecodeError, DomainError, LoadError, SessionError
from .geometry import BoundingBox, Sequence, iou
from .protocol import LineChannel, ProtocolMessage, hello_engine
from .spaces import StartPointList
from . import dataset

STATE_INIT = "init"
STATE_TRACKING = "tracking"
STATE_FAILED = "failed"
STATE_SKIPPED = "skipped"


@dataclass(frozen=True)
class RopePolicy:
    """Failure rule for restart-enabled evaluation.

    A tracking frame fails when overlap with ground truth drops below
    ``fail_overlap_threshold``; ``consecutive_n`` such frames in a row
    trigger a restart.
    """

    fail_overlap_threshold: float = 0.5
    consecutive_n: int = 10


DEFAULT_ROPE_POLICY = RopePolicy()


@dataclass(frozen=True)
class Trajectory:
    """A tracker's per-frame output for one sequence under one mechanism."""

    tracker_id: str
    sequence_id: str
    mechanism: str  # "ope" | "rope"
    boxes: Tuple[Optional[BoundingBox], ...]
    states: Tuple[str, ...]
    times_ms: Tuple[float, ...]
    error: Optional[str] = None

    def __post_init__(self):
        if not (len(self.boxes) == len(self.states) == len(self.times_ms)):
            raise DomainError("trajectory arrays must have equal length")

    def __len__(self) -> int:
        return len(self.boxes)


@dataclass(frozen=True)
class RestartLog:
    """Restart events and the successfully tracked spans between them."""

    events: Tuple[Tuple[int, int], ...]  # (fail-detected frame, reinit frame)
    segments: Tuple[Tuple[int, int], ...]  # [start, end) spans

    def __post_init__(self):
        for detect, reinit in self.events:
            if reinit <= detect:
                raise DomainError(f"reinit frame {reinit} must follow detection {detect}")
        prev_end = -1
        for s, e in self.segments:
            if s >= e or s < prev_end:
                raise DomainError("segments must be ordered and non-overlapping")
            prev_end = e

    @property
    def restart_count(self) -> int:
        return len(self.events)

    @property
    def longest_segment(self) -> int:
        return max((e - s for s, e in self.segments), default=0)


class TrackerSession:
    """Request/reply protocol session over a line channel."""

    def __init__(self, channel: LineChannel, timeout: float = 60.0):
        self._channel = channel
        self.timeout = timeout
        self.name = "unknown"

    def handshake(self) -> str:
        self._channel.write_message(hello_engine())
        reply = self._channel.read_message(self.timeout)
        if reply.type != "hello" or not reply.name:
            raise SessionError(f"bad handshake reply: {reply}")
        self.name = reply.name
        return self.name

    def _await_state(self) -> BoundingBox:
        reply = self._channel.read_message(self.timeout)
        if reply.type == "error":
            raise SessionError(f"tracker error: {reply.message}")
        if reply.type != "state" or reply.bbox is None:
            raise SessionError(f"expected state reply, got {reply.type}")
        try:
            return BoundingBox(*reply.bbox)
        except DomainError as exc:
            raise SessionError(f"tracker returned a degenerate box: {exc}") from exc

    def init(self, image_path: str, box: BoundingBox) -> BoundingBox:
        self._channel.write_message(
            ProtocolMessage(type="init", frame=image_path, bbox=box.as_tuple())
        )
        return self._await_state()

    def frame(self, image_path: str) -> BoundingBox:
        self._channel.write_message(ProtocolMessage(type="frame", frame=image_path))
        return self._await_state()

    def quit(self) -> None:
        try:
            self._channel.write_message(ProtocolMessage(type="quit"))
        except SessionError:
            pass

    def close(self) -> None:
        self.quit()
        self._channel.close()


class ScriptedSession:
    """In-process stand-in for a tracker: a pure reply policy.

    The policy is a callable (init_index, frame_index) -> box-or-None;
    None replies simulate a tracker that lost the target completely (they
    score as overlap zero). Used by the replay harness and the tests; no
    external process or channel is involved.
    """

    def __init__(self, policy: Callable[[int, int], Optional[BoundingBox]], name: str = "scripted"):
        self._policy = policy
        self.name = name
        self._init_index = 0
        self.timeout = 0.0

    def handshake(self) -> str:
        return self.name

    def init(self, index: int, box: BoundingBox) -> Optional[BoundingBox]:
        self._init_index = index
        return box

    def frame(self, index: int) -> Optional[BoundingBox]:
        return self._policy(self._init_index, index)

    def close(self) -> None:
        pass


def _frame_key(session, seq: Sequence, index: int):
    """Live sessions address frames by image path, scripted ones by index."""
    if isinstance(session, ScriptedSession):
        return index
    return dataset.image_path(seq, index)


def run_ope(session, seq: Sequence) -> Trajectory:
    """One-pass evaluation: init on frame 0, then track straight through."""
    n = len(seq)
    boxes: List[Optional[BoundingBox]] = []
    states: List[str] = []
    times: List[float] = []
    error = None
    t0 = time.perf_counter()
    try:
        boxes.append(session.init(_frame_key(session, seq, 0), seq.groundtruth[0]))
        states.append(STATE_INIT)
        times.append((time.perf_counter() - t0) * 1000.0)
        for i in range(1, n):
            t0 = time.perf_counter()
            boxes.append(session.frame(_frame_key(session, seq, i)))
            states.append(STATE_TRACKING)
            times.append((time.perf_counter() - t0) * 1000.0)
    except (SessionError, DecodeError) as exc:
        error = f"frame {len(boxes)}: {exc}"
        while len(boxes) < n:
            boxes.append(None)
            states.append(STATE_FAILED)
            times.append(0.0)
    return Trajectory(
        tracker_id=session.name,
        sequence_id=seq.id,
        mechanism="ope",
        boxes=tuple(boxes),
        states=tuple(states),
        times_ms=tuple(times),
        error=error,
    )


def run_rope(
    session,
    seq: Sequence,
    starts: StartPointList,
    policy: RopePolicy = DEFAULT_ROPE_POLICY,
) -> Tuple[Trajectory, RestartLog]:
    """Restart-enabled evaluation; see the module docstring for the rules."""
    if not starts.points:
        raise DomainError(f"sequence {seq.id}: empty start point list")
    n = len(seq)
    boxes: List[Optional[BoundingBox]] = [None] * n
    states: List[str] = [STATE_SKIPPED] * n
    times: List[float] = [0.0] * n
    events: List[Tuple[int, int]] = []
    segments: List[Tuple[int, int]] = []
    error = None

    first = starts.points[0]
    if seq.groundtruth[first] is None:
        raise DomainError(f"sequence {seq.id}: start point {first} has no target")
    seg_start: Optional[int] = None  # left edge of the open segment
    streak = 0
    streak_start = -1
    i = first
    try:
        t0 = time.perf_counter()
        boxes[first] = session.init(_frame_key(session, seq, first), seq.groundtruth[first])
        states[first] = STATE_INIT
        times[first] = (time.perf_counter() - t0) * 1000.0
        seg_start = first
        i = first + 1
        while i < n:
            t0 = time.perf_counter()
            pred = session.frame(_frame_key(session, seq, i))
            boxes[i] = pred
            states[i] = STATE_TRACKING
            times[i] = (time.perf_counter() - t0) * 1000.0
            gt = seq.groundtruth[i]
            if gt is not None:  # absent frames are invisible to the counter
                overlap = iou(pred, gt) if pred is not None else 0.0
                if overlap < policy.fail_overlap_threshold:
                    if streak == 0:
                        streak_start = i
                    streak += 1
                else:
                    streak = 0
                if streak >= policy.consecutive_n:
                    segments.append((seg_start, streak_start))
                    seg_start = None
                    reinit = next((s for s in starts.points if s > i), None)
                    if reinit is None:
                        break  # remaining frames stay skipped
                    events.append((i, reinit))
                    t0 = time.perf_counter()
                    boxes[reinit] = session.init(
                        _frame_key(session, seq, reinit), seq.groundtruth[reinit]
                    )
                    states[reinit] = STATE_INIT
                    times[reinit] = (time.perf_counter() - t0) * 1000.0
                    seg_start = reinit
                    streak = 0
                    streak_start = -1
                    i = reinit + 1
                    continue
            i += 1
        if seg_start is not None:
            segments.append((seg_start, n))
    except (SessionError, DecodeError) as exc:
        error = f"frame {i}: {exc}"
        for j in range(i, n):
            if states[j] == STATE_SKIPPED:
                states[j] = STATE_FAILED
        if seg_start is not None and i > seg_start:
            segments.append((seg_start, i))
    traj = Trajectory(
        tracker_id=session.name,
        sequence_id=seq.id,
        mechanism="rope",
        boxes=tuple(boxes),
        states=tuple(states),
        times_ms=tuple(times),
        error=error,
    )
    return traj, RestartLog(events=tuple(events), segments=tuple(segments))


def parse_trajectory(
    text: str, seq: Sequence, source: str, tracker_id: str = "replay"
) -> Trajectory:
    """Parse replay rows (`x,y,w,h` or `absent`, one per frame).

    Replay trajectories carry OPE semantics: every frame counts as
    tracking. Errors name the source and line number.
    """
    lines = text.splitlines()
    if len(lines) != len(seq):
        raise LoadError(
            f"{source}: {len(lines)} rows for {len(seq)}-frame sequence {seq.id!r}"
        )
    boxes: List[Optional[BoundingBox]] = []
    for lineno, line in enumerate(lines, start=1):
        row = line.strip()
        if row == "absent":
            boxes.append(None)
            continue
        parts = row.split(",")
        if len(parts) != 4:
            raise LoadError(f"{source}:{lineno}: expected `x,y,w,h` or `absent`, got {row!r}")
        try:
            box = BoundingBox(*(float(v) for v in parts))
        except (ValueError, DomainError) as exc:
            raise LoadError(f"{source}:{lineno}: bad box {row!r}: {exc}") from exc
        boxes.append(box)
    n = len(boxes)
    return Trajectory(
        tracker_id=tracker_id,
        sequence_id=seq.id,
        mechanism="ope",
        boxes=tuple(boxes),
        states=(STATE_TRACKING,) * n,
        times_ms=(0.0,) * n,
    )


def load_trajectory(path: Union[str, Path], seq: Sequence, tracker_id: str = "replay") -> Trajectory:
    """Replay a pre-recorded result file; see :func:`parse_trajectory`."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot read result file {path}: {exc}") from exc
    return parse_trajectory(text, seq, str(path), tracker_id)


def write_trajectory(traj: Trajectory, csv_path: Union[str, Path]) -> None:
    """Write the replay-compatible box file for a trajectory."""
    rows = []
    for box in traj.boxes:
        if box is None:
            rows.append("absent")
        else:
            rows.append(",".join(format(v, ".9g") for v in box.as_tuple()))
    Path(csv_path).write_bytes(("\n".join(rows) + "\n").encode())


def write_run_meta(
    traj: Trajectory,
    meta_path: Union[str, Path],
    log: Optional[RestartLog] = None,
    include_times: bool = True,
) -> None:
    doc = {
        "schema": 1,
        "tracker": traj.tracker_id,
        "sequence": traj.sequence_id,
        "mechanism": traj.mechanism,
        "states": list(traj.states),
        "times_ms": [round(t, 3) for t in traj.times_ms] if include_times else None,
        "error": traj.error,
        "restarts": [list(e) for e in log.events] if log else None,
        "segments": [list(s) for s in log.segments] if log else None,
    }
    Path(meta_path).write_bytes((json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())


def read_run_entry(
    csv_path: Union[str, Path], seq: Sequence
) -> Tuple[Trajectory, Optional[RestartLog]]:
    """Read back one entry written by the eval command (boxes + meta)."""
    meta_path = Path(str(csv_path).removesuffix(".csv") + ".meta.json")
    traj = load_trajectory(csv_path, seq)
    if not meta_path.is_file():
        return traj, None
    try:
        doc = json.loads(meta_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot parse run meta {meta_path}: {exc}") from exc
    states = doc.get("states")
    if states is not None:
        if len(states) != len(traj):
            raise LoadError(f"{meta_path}: states length mismatch")
        traj = replace(traj, states=tuple(states))
    times = doc.get("times_ms")
    if times is not None:
        traj = replace(traj, times_ms=tuple(float(t) for t in times))
    traj = replace(
        traj,
        tracker_id=doc.get("tracker", traj.tracker_id),
        mechanism=doc.get("mechanism", traj.mechanism),
        error=doc.get("error"),
    )
    log = None
    if doc.get("segments") is not None:
        log = RestartLog(
            events=tuple((int(a), int(b)) for a, b in doc.get("restarts") or []),
            segments=tuple((int(a), int(b)) for a, b in doc["segments"]),
        )
    return traj, log
