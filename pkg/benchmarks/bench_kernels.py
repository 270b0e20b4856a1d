"""Benchmark the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times each hot kernel on realistic workloads (full-frame image ops,
per-trajectory geometry batches, the mining scan) and prints the speedup
of the compiled path. Exits with a notice when the extension is not
built.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sotverse import _kernels_np  # noqa: E402

try:
    from sotverse import _ckernels
except ImportError:
    _ckernels = None


def timeit(fn, *args, repeats: int) -> float:
    fn(*args)  # warm-up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def workloads(rng: np.random.Generator):
    gray = rng.random((480, 640))
    gray_b = rng.random((480, 640))
    img = rng.random((480, 640, 3))
    boxes_p = np.column_stack(
        [rng.uniform(0, 500, 20000), rng.uniform(0, 400, 20000),
         rng.uniform(5, 100, 20000), rng.uniform(5, 100, 20000)]
    )
    boxes_g = np.column_stack(
        [rng.uniform(0, 500, 20000), rng.uniform(0, 400, 20000),
         rng.uniform(5, 100, 20000), rng.uniform(5, 100, 20000)]
    )
    flags = (rng.random(30000) < 0.55).astype(np.uint8)
    starts = np.flatnonzero(rng.random(30000) < 0.5).astype(np.int64)
    return [
        ("laplacian_variance (480x640)", "laplacian_variance", (gray,)),
        ("pearson (480x640)", "pearson", (gray, gray_b)),
        ("channel_power_means (480x640x3)", "channel_power_means", (img, 6.0)),
        ("iou_pairs (20k boxes)", "iou_pairs", (boxes_p, boxes_g)),
        ("center_distances (20k boxes)", "center_distances", (boxes_p, boxes_g)),
        ("screen_max_ends (30k frames)", "screen_max_ends", (flags, starts)),
    ]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()
    if _ckernels is None:
        print("compiled extension not built; run `python setup.py build_ext --inplace`")
        return 1
    rng = np.random.default_rng(7)
    rows = []
    for label, name, wargs in workloads(rng):
        t_np = timeit(getattr(_kernels_np, name), *wargs, repeats=args.repeats)
        t_c = timeit(getattr(_ckernels, name), *wargs, repeats=args.repeats)
        rows.append((label, t_np, t_c, t_np / t_c))
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'compiled':>10}  {'speedup':>8}")
    for label, t_np, t_c, speedup in rows:
        print(f"{label:<{width}}  {t_np * 1e3:>8.3f}ms  {t_c * 1e3:>8.3f}ms  {speedup:>7.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
