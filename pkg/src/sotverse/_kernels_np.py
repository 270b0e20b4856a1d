"""Numpy implementations of the hot kernels.

This is the reference backend: the compiled extension in ``_ckernels.pyx``
implements the same contracts and is validated against this module. All
functions are raw-numeric: edge rules (warnings, unavailable markers) live
in the calling modules. NaN is the common "undefined" sentinel.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def laplacian_variance(gray: np.ndarray) -> float:
    """Variance of the 3x3 4-neighbor Laplacian over the valid region.

    Kernel: center 4, cross -1, corners 0. Grids smaller than 3x3 have no
    valid response and yield NaN.
    """
    g = np.asarray(gray, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 3 or g.shape[1] < 3:
        return float("nan")
    if np.ptp(g) == 0.0:  # constant grid: exactly zero, no rounding residue
        return 0.0
    r = (
        4.0 * g[1:-1, 1:-1]
        - g[:-2, 1:-1]
        - g[2:, 1:-1]
        - g[1:-1, :-2]
        - g[1:-1, 2:]
    )
    return float(r.var())


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson product-moment correlation of two equal-shape grids.

    Returns NaN when either grid has zero standard deviation.
    """
    x = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    if x.shape != y.shape or x.size < 2:
        return float("nan")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = np.sqrt(np.dot(dx, dx) * np.dot(dy, dy))
    if denom == 0.0:
        return float("nan")
    return float(np.dot(dx, dy) / denom)


def channel_power_means(img: np.ndarray, p: float) -> np.ndarray:
    """Per-channel Minkowski mean: (mean of v^p)^(1/p) for each channel."""
    a = np.asarray(img, dtype=np.float64)
    return np.power(np.power(a, p).mean(axis=(0, 1)), 1.0 / p)


def iou_pairs(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Row-wise IoU of two (N, 4) xywh arrays. NaN rows propagate NaN.

    Identical rows score exactly 1.0 (the formula can lose an ulp when
    x+w crosses a binade edge).
    """
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    ix = np.minimum(p[:, 0] + p[:, 2], g[:, 0] + g[:, 2]) - np.maximum(p[:, 0], g[:, 0])
    iy = np.minimum(p[:, 1] + p[:, 3], g[:, 1] + g[:, 3]) - np.maximum(p[:, 1], g[:, 1])
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    union = p[:, 2] * p[:, 3] + g[:, 2] * g[:, 3] - inter
    out = np.minimum(inter / union, 1.0)
    same = np.all(p == g, axis=1)
    out[same] = 1.0
    return out


def center_distances(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean center distance of two (N, 4) xywh arrays."""
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    dx = (p[:, 0] + p[:, 2] / 2.0) - (g[:, 0] + g[:, 2] / 2.0)
    dy = (p[:, 1] + p[:, 3] / 2.0) - (g[:, 1] + g[:, 3] / 2.0)
    return np.hypot(dx, dy)


def normalized_center_distances(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Row-wise center distance with axes divided by ground-truth w and h."""
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    dx = ((p[:, 0] + p[:, 2] / 2.0) - (g[:, 0] + g[:, 2] / 2.0)) / g[:, 2]
    dy = ((p[:, 1] + p[:, 3] / 2.0) - (g[:, 1] + g[:, 3] / 2.0)) / g[:, 3]
    return np.hypot(dx, dy)


def screen_max_ends(flags: np.ndarray, starts: np.ndarray) -> np.ndarray:
    """For each start a, the largest end b with >= half the frames flagged.

    Returns, per start, the largest b in (a, N] such that
    sum(flags[a:b]) >= 0.5 * (b - a), or -1 when no such b exists.
    Equivalent to shrinking b from N until the density condition holds.

    Works on the integer transform t[i] = 2*prefix[i] - i: the density
    condition for span [a, b) is exactly t[b] >= t[a], so the answer is the
    last position whose transform value reaches t[a], found in O(N + S) via
    a last-occurrence table and a suffix maximum.
    """
    f = np.asarray(flags, dtype=np.int64)
    s = np.asarray(starts, dtype=np.int64)
    n = f.shape[0]
    prefix = np.concatenate(([0], np.cumsum(f)))
    t = 2 * prefix - np.arange(n + 1)
    last = np.full(2 * n + 2, -1, dtype=np.int64)
    np.maximum.at(last, t + n, np.arange(n + 1))
    suffix_best = np.maximum.accumulate(last[::-1])[::-1]
    if s.size == 0:
        return np.empty(0, dtype=np.int64)
    ans = suffix_best[t[s] + n]
    return np.where(ans > s, ans, -1)
