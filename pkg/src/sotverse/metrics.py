"""Performance indicators computed from trajectories.

Per sequence: precision (center error under pixel thresholds, headline at
20 px), normalized precision (scale-free center error, headline at 0.2),
success (overlap exceedance curve, headline AUC, mean overlap also
reported), the challenging curve (success rate restricted to frames whose
inter-frame correlation is at most a threshold, headline at 0.75), the
attribute breakdown (share of each challenge flag among failed frames)
and, for restart-enabled runs, the robust summary (restart count and
longest tracked segment).

Scoring scope: frames whose ground truth is absent are excluded
everywhere, and only frames in the ``tracking`` state count (init and
skipped frames never enter a denominator). An absent prediction on a
present target scores zero overlap and infinite center error. Empty
denominators yield *undefined* points, serialized as nulls and skipped in
plots, never coerced to zero.

Environment aggregation is the unweighted mean of per-sequence values; a
sequence-length weighted variant is also emitted for reports over spaces
with very uneven lengths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence as Seq, Tuple

import numpy as np

from . import kernels
from .attributes import ATTRIBUTE_NAMES, AttributeTable
from .calibration import ChallengeFlags
from .engine import STATE_TRACKING, RestartLog, Trajectory
from .errors import ConfigError, DomainError
from .geometry import Sequence

INDICATORS = (
    "precision",
    "normalized_precision",
    "success",
    "challenging",
    "attribute",
    "robust",
)

PRECISION_THRESHOLDS = tuple(float(t) for t in range(0, 51))
PRECISION_HEADLINE = 20.0
NORM_PRECISION_THRESHOLDS = tuple(t / 100.0 for t in range(0, 51))
NORM_PRECISION_HEADLINE = 0.2
SUCCESS_THRESHOLDS = tuple(t / 100.0 for t in range(0, 101))
CHALLENGING_THRESHOLDS = tuple(t / 20.0 for t in range(0, 21))
CHALLENGING_HEADLINE = 0.75
SUCCESS_FRAME_OVERLAP = 0.5


@dataclass(frozen=True)
class Curve:
    """A metric curve: strictly increasing thresholds, values in [0, 1].

    ``None`` values mark thresholds where the metric is undefined. The
    headline is the single (threshold, value) pair used for ranking.
    """

    thresholds: Tuple[float, ...]
    values: Tuple[Optional[float], ...]
    headline_threshold: Optional[float] = None

    def __post_init__(self):
        if len(self.thresholds) != len(self.values):
            raise DomainError("curve thresholds and values must align")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise DomainError("curve thresholds must be strictly increasing")

    @property
    def headline(self) -> Optional[float]:
        if self.headline_threshold is None:
            return None
        i = self.thresholds.index(self.headline_threshold)
        return self.values[i]


@dataclass(frozen=True)
class RobustPoint:
    """Mean restart count and mean longest tracked segment length."""

    restarts: float
    longest_segment: float

    def __post_init__(self):
        if self.restarts < 0 or self.longest_segment < 0:
            raise DomainError("robust point components must be non-negative")


@dataclass(frozen=True)
class SequenceScores:
    sequence_id: str
    length: int
    evaluated_frames: int
    precision: Curve
    normalized_precision: Curve
    success: Curve
    success_auc: Optional[float]
    mean_overlap: Optional[float]
    challenging: Optional[Curve]
    attribute_ratios: Optional[Mapping[str, Optional[float]]]
    restarts: Optional[int] = None
    longest_segment: Optional[int] = None


def _aligned_arrays(traj: Trajectory, seq: Sequence):
    """(distances, norm distances, overlaps) over evaluated frames."""
    if len(traj) != len(seq):
        raise DomainError(
            f"trajectory length {len(traj)} != sequence length {len(seq)}"
        )
    rows_p, rows_g, eval_idx, absent_pred = [], [], [], []
    for i, (pred, gt, state) in enumerate(zip(traj.boxes, seq.groundtruth, traj.states)):
        if gt is None or state != STATE_TRACKING:
            continue
        eval_idx.append(i)
        if pred is None:
            absent_pred.append(len(rows_p))
            rows_p.append((0.0, 0.0, 1.0, 1.0))  # placeholder, overwritten below
        else:
            rows_p.append(pred.as_tuple())
        rows_g.append(gt.as_tuple())
    if not rows_p:
        return np.empty(0), np.empty(0), np.empty(0), []
    p = np.asarray(rows_p, dtype=np.float64)
    g = np.asarray(rows_g, dtype=np.float64)
    d = np.asarray(kernels.center_distances(p, g))
    nd = np.asarray(kernels.normalized_center_distances(p, g))
    s = np.asarray(kernels.iou_pairs(p, g))
    if absent_pred:
        idx = np.asarray(absent_pred, dtype=np.int64)
        d[idx] = np.inf
        nd[idx] = np.inf
        s[idx] = 0.0
    return d, nd, s, eval_idx


def _exceedance(values: np.ndarray, thresholds: Seq[float], below: bool) -> Tuple[Optional[float], ...]:
    n = values.size
    if n == 0:
        return (None,) * len(thresholds)
    t = np.asarray(thresholds, dtype=np.float64)
    if below:
        counts = (values[:, None] <= t[None, :]).sum(axis=0)
    else:
        counts = (values[:, None] >= t[None, :]).sum(axis=0)
    return tuple(float(c) / n for c in counts)


def precision_curve(traj: Trajectory, seq: Sequence) -> Curve:
    d, _, _, _ = _aligned_arrays(traj, seq)
    return Curve(PRECISION_THRESHOLDS, _exceedance(d, PRECISION_THRESHOLDS, below=True), PRECISION_HEADLINE)


def normalized_precision_curve(traj: Trajectory, seq: Sequence) -> Curve:
    _, nd, _, _ = _aligned_arrays(traj, seq)
    return Curve(
        NORM_PRECISION_THRESHOLDS,
        _exceedance(nd, NORM_PRECISION_THRESHOLDS, below=True),
        NORM_PRECISION_HEADLINE,
    )


def success_curve(traj: Trajectory, seq: Sequence) -> Tuple[Curve, Optional[float], Optional[float]]:
    """(curve, AUC, mean overlap). AUC is the mean of the curve values."""
    _, _, s, _ = _aligned_arrays(traj, seq)
    values = _exceedance(s, SUCCESS_THRESHOLDS, below=False)
    curve = Curve(SUCCESS_THRESHOLDS, values)
    if s.size == 0:
        return curve, None, None
    auc = float(np.mean(np.asarray(values, dtype=np.float64)))
    return curve, auc, float(s.mean())


def challenging_curve(
    traj: Trajectory, seq: Sequence, corrcoef: Seq[Optional[float]]
) -> Curve:
    """Success rate over frames with inter-frame correlation <= threshold.

    Needs the corrcoef attribute column; frames with an unavailable value
    are left out of both numerator and denominator.
    """
    if len(corrcoef) != len(seq):
        raise DomainError("corrcoef column length mismatch")
    _, _, s, eval_idx = _aligned_arrays(traj, seq)
    rho, keep = [], []
    for pos, i in enumerate(eval_idx):
        if corrcoef[i] is not None:
            rho.append(corrcoef[i])
            keep.append(pos)
    rho_arr = np.asarray(rho, dtype=np.float64)
    succ = (
        np.asarray(s)[np.asarray(keep, dtype=np.int64)] >= SUCCESS_FRAME_OVERLAP
        if keep
        else np.empty(0, dtype=bool)
    )
    values: List[Optional[float]] = []
    for theta in CHALLENGING_THRESHOLDS:
        mask = rho_arr <= theta
        denom = int(mask.sum())
        values.append(float(succ[mask].sum()) / denom if denom else None)
    return Curve(CHALLENGING_THRESHOLDS, tuple(values), CHALLENGING_HEADLINE)


def attribute_breakdown(
    traj: Trajectory, seq: Sequence, flags: ChallengeFlags
) -> Dict[str, Optional[float]]:
    """Among failed frames (overlap < 0.5), the share carrying each flag.

    All ratios are undefined when there are no failed frames.
    """
    if len(flags) != len(seq):
        raise DomainError("flags length mismatch")
    _, _, s, eval_idx = _aligned_arrays(traj, seq)
    fail_positions = [i for pos, i in enumerate(eval_idx) if s[pos] < SUCCESS_FRAME_OVERLAP]
    if not fail_positions:
        return {name: None for name in ATTRIBUTE_NAMES}
    out = {}
    for k, name in enumerate(ATTRIBUTE_NAMES):
        hits = sum(1 for i in fail_positions if flags.rows[i][k])
        out[name] = hits / len(fail_positions)
    return out


def score_sequence(
    traj: Trajectory,
    seq: Sequence,
    attrs: Optional[AttributeTable] = None,
    flags: Optional[ChallengeFlags] = None,
    log: Optional[RestartLog] = None,
) -> SequenceScores:
    d, nd, s, eval_idx = _aligned_arrays(traj, seq)
    success, auc, mean_overlap = success_curve(traj, seq)
    challenging = None
    if attrs is not None:
        corr = attrs.column("corrcoef")
        if any(v is not None for v in corr):
            challenging = challenging_curve(traj, seq, corr)
    ratios = attribute_breakdown(traj, seq, flags) if flags is not None else None
    return SequenceScores(
        sequence_id=seq.id,
        length=len(seq),
        evaluated_frames=len(eval_idx),
        precision=Curve(PRECISION_THRESHOLDS, _exceedance(d, PRECISION_THRESHOLDS, True), PRECISION_HEADLINE),
        normalized_precision=Curve(
            NORM_PRECISION_THRESHOLDS, _exceedance(nd, NORM_PRECISION_THRESHOLDS, True), NORM_PRECISION_HEADLINE
        ),
        success=success,
        success_auc=auc,
        mean_overlap=mean_overlap,
        challenging=challenging,
        attribute_ratios=ratios,
        restarts=log.restart_count if log else None,
        longest_segment=log.longest_segment if log else None,
    )


def _mean_defined(values: Seq[Optional[float]], weights: Optional[Seq[float]] = None) -> Optional[float]:
    pairs = [
        (v, 1.0 if weights is None else weights[i])
        for i, v in enumerate(values)
        if v is not None
    ]
    if not pairs:
        return None
    total_w = sum(w for _, w in pairs)
    return sum(v * w for v, w in pairs) / total_w


def mean_curve(curves: Seq[Curve], weights: Optional[Seq[float]] = None) -> Curve:
    """Pointwise mean over sequences, undefined points left out per point."""
    if not curves:
        raise DomainError("cannot average zero curves")
    thresholds = curves[0].thresholds
    headline = curves[0].headline_threshold
    for c in curves[1:]:
        if c.thresholds != thresholds:
            raise ConfigError("cannot aggregate curves with different thresholds")
    values = tuple(
        _mean_defined([c.values[k] for c in curves], weights)
        for k in range(len(thresholds))
    )
    return Curve(thresholds, values, headline)


@dataclass(frozen=True)
class EnvironmentScores:
    """Aggregate of one tracker over one space under one mechanism."""

    precision: Curve
    normalized_precision: Curve
    success: Curve
    success_auc: Optional[float]
    mean_overlap: Optional[float]
    challenging: Optional[Curve]
    attribute_ratios: Optional[Mapping[str, Optional[float]]]
    robust: Optional[RobustPoint]
    sequences: int
    weighted: bool


def aggregate_environment(
    scores: Seq[SequenceScores],
    logs: Optional[Seq[Optional[RestartLog]]] = None,
    weighted: bool = False,
) -> EnvironmentScores:
    """Mean of per-sequence scores; weights are sequence lengths if asked."""
    if not scores:
        raise DomainError("nothing to aggregate")
    mechanisms = {  # robust data only makes sense for one mechanism at a time
        "rope" if sc.restarts is not None else "ope" for sc in scores
    }
    if len(mechanisms) > 1:
        raise ConfigError("cannot aggregate OPE and R-OPE runs together")
    weights = [float(sc.length) for sc in scores] if weighted else None
    challenging = None
    ch_curves = [sc.challenging for sc in scores if sc.challenging is not None]
    if ch_curves:
        ch_weights = (
            [float(sc.length) for sc in scores if sc.challenging is not None]
            if weighted
            else None
        )
        challenging = mean_curve(ch_curves, ch_weights)
    ratios = None
    if any(sc.attribute_ratios is not None for sc in scores):
        ratios = {}
        for name in ATTRIBUTE_NAMES:
            vals, ws = [], []
            for sc in scores:
                if sc.attribute_ratios is not None:
                    vals.append(sc.attribute_ratios[name])
                    ws.append(float(sc.length))
            ratios[name] = _mean_defined(vals, ws if weighted else None)
    robust = None
    if logs is not None and any(log is not None for log in logs):
        present = [log for log in logs if log is not None]
        robust = RobustPoint(
            restarts=float(np.mean([log.restart_count for log in present])),
            longest_segment=float(np.mean([log.longest_segment for log in present])),
        )
    return EnvironmentScores(
        precision=mean_curve([sc.precision for sc in scores], weights),
        normalized_precision=mean_curve([sc.normalized_precision for sc in scores], weights),
        success=mean_curve([sc.success for sc in scores], weights),
        success_auc=_mean_defined([sc.success_auc for sc in scores], weights),
        mean_overlap=_mean_defined([sc.mean_overlap for sc in scores], weights),
        challenging=challenging,
        attribute_ratios=ratios,
        robust=robust,
        sequences=len(scores),
        weighted=weighted,
    )


def robust_summary(logs: Seq[RestartLog]) -> RobustPoint:
    """Mean restarts and mean longest-segment length over sequences."""
    if not logs:
        raise DomainError("robust summary needs at least one restart log")
    return RobustPoint(
        restarts=float(np.mean([log.restart_count for log in logs])),
        longest_segment=float(np.mean([log.longest_segment for log in logs])),
    )
