# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels.

Contract-identical to ``_kernels_np``; results agree with the reference to
1e-9 relative (summation order differs, so the last bits may not).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport hypot, isnan, pow, sqrt

cnp.import_array()

BACKEND = "c"


def laplacian_variance(gray):
    cdef double[:, ::1] g = np.ascontiguousarray(gray, dtype=np.float64)
    cdef Py_ssize_t h = g.shape[0], w = g.shape[1]
    if h < 3 or w < 3:
        return float("nan")
    cdef Py_ssize_t i, j
    cdef double lo = g[0, 0], hi = g[0, 0]
    for i in range(h):
        for j in range(w):
            if g[i, j] < lo:
                lo = g[i, j]
            if g[i, j] > hi:
                hi = g[i, j]
    if lo == hi:  # constant grid: exactly zero, no rounding residue
        return 0.0
    cdef double r, acc = 0.0, acc2 = 0.0
    cdef double n = <double> ((h - 2) * (w - 2))
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            r = 4.0 * g[i, j] - g[i - 1, j] - g[i + 1, j] - g[i, j - 1] - g[i, j + 1]
            acc += r
    cdef double mean = acc / n
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            r = 4.0 * g[i, j] - g[i - 1, j] - g[i + 1, j] - g[i, j - 1] - g[i, j + 1]
            acc2 += (r - mean) * (r - mean)
    return acc2 / n


def pearson(a, b):
    cdef double[::1] x = np.ascontiguousarray(a, dtype=np.float64).ravel()
    cdef double[::1] y = np.ascontiguousarray(b, dtype=np.float64).ravel()
    cdef Py_ssize_t n = x.shape[0], i
    if n != y.shape[0] or n < 2:
        return float("nan")
    cdef double sx = 0.0, sy = 0.0
    for i in range(n):
        sx += x[i]
        sy += y[i]
    cdef double mx = sx / n, my = sy / n
    cdef double sxy = 0.0, sxx = 0.0, syy = 0.0, dx, dy
    for i in range(n):
        dx = x[i] - mx
        dy = y[i] - my
        sxy += dx * dy
        sxx += dx * dx
        syy += dy * dy
    cdef double denom = sqrt(sxx * syy)
    if denom == 0.0:
        return float("nan")
    return sxy / denom


def channel_power_means(img, double p):
    cdef double[:, :, ::1] a = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1], c = a.shape[2]
    cdef Py_ssize_t i, j, k, e
    cdef int int_p = <int> p
    cdef bint integral = (p == <double> int_p) and int_p > 0
    cdef double v, r
    out = np.zeros(c, dtype=np.float64)
    cdef double[::1] acc = out
    for i in range(h):
        for j in range(w):
            for k in range(c):
                v = a[i, j, k]
                if integral:  # repeated multiply beats libm pow
                    r = v
                    for e in range(int_p - 1):
                        r *= v
                    acc[k] += r
                else:
                    acc[k] += pow(v, p)
    cdef double n = <double> (h * w)
    for k in range(c):
        acc[k] = pow(acc[k] / n, 1.0 / p)
    return out


def iou_pairs(p, g):
    cdef double[:, ::1] pa = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[:, ::1] ga = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t n = pa.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double ix, iy, inter, union
    for i in range(n):
        if (pa[i, 0] == ga[i, 0] and pa[i, 1] == ga[i, 1]
                and pa[i, 2] == ga[i, 2] and pa[i, 3] == ga[i, 3]):
            o[i] = 1.0  # identical rows score exactly 1
            continue
        ix = min(pa[i, 0] + pa[i, 2], ga[i, 0] + ga[i, 2]) - max(pa[i, 0], ga[i, 0])
        iy = min(pa[i, 1] + pa[i, 3], ga[i, 1] + ga[i, 3]) - max(pa[i, 1], ga[i, 1])
        if isnan(ix) or isnan(iy):
            o[i] = ix + iy
            continue
        inter = (ix if ix > 0.0 else 0.0) * (iy if iy > 0.0 else 0.0)
        union = pa[i, 2] * pa[i, 3] + ga[i, 2] * ga[i, 3] - inter
        o[i] = inter / union
        if o[i] > 1.0:
            o[i] = 1.0
    return out


def center_distances(p, g):
    cdef double[:, ::1] pa = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[:, ::1] ga = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t n = pa.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = hypot(
            (pa[i, 0] + pa[i, 2] / 2.0) - (ga[i, 0] + ga[i, 2] / 2.0),
            (pa[i, 1] + pa[i, 3] / 2.0) - (ga[i, 1] + ga[i, 3] / 2.0),
        )
    return out


def normalized_center_distances(p, g):
    cdef double[:, ::1] pa = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[:, ::1] ga = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t n = pa.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = hypot(
            ((pa[i, 0] + pa[i, 2] / 2.0) - (ga[i, 0] + ga[i, 2] / 2.0)) / ga[i, 2],
            ((pa[i, 1] + pa[i, 3] / 2.0) - (ga[i, 1] + ga[i, 3] / 2.0)) / ga[i, 3],
        )
    return out


def screen_max_ends(flags, starts):
    cdef unsigned char[::1] f = np.ascontiguousarray(flags, dtype=np.uint8)
    cdef long long[::1] s = np.ascontiguousarray(starts, dtype=np.int64)
    cdef Py_ssize_t n = f.shape[0], m = s.shape[0]
    cdef Py_ssize_t i, b
    cdef long long prefix = 0, t, v
    # t[i] = 2*prefix[i] - i; span [a, b) is half-challenging iff t[b] >= t[a]
    last_np = np.full(2 * n + 2, -1, dtype=np.int64)
    cdef long long[::1] last = last_np
    last[n] = 0  # t[0] = 0
    for b in range(1, n + 1):
        prefix += f[b - 1]
        t = 2 * prefix - b
        last[t + n] = b
    cdef long long best = -1
    for i in range(2 * n + 1, -1, -1):
        if last[i] > best:
            best = last[i]
        last[i] = best
    out = np.empty(m, dtype=np.int64)
    cdef long long[::1] o = out
    cdef long long a, ans
    t_np = np.empty(n + 1, dtype=np.int64)
    cdef long long[::1] tv = t_np
    prefix = 0
    tv[0] = 0
    for b in range(1, n + 1):
        prefix += f[b - 1]
        tv[b] = 2 * prefix - b
    for i in range(m):
        a = s[i]
        ans = last[tv[a] + n]
        o[i] = ans if ans > a else -1
    return out
