"""Backend selection for the hot kernels.

At import time this module picks the compiled extension when it is
available and falls back to the numpy reference implementation otherwise.
Set ``SOTVERSE_PURE_PYTHON=1`` to force the fallback (the byte-exact
reference path used for golden files). The choice is fixed for the
lifetime of the process.
"""

from __future__ import annotations

import os

from . import _kernels_np

if os.environ.get("SOTVERSE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_np
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_np

BACKEND = _impl.BACKEND

laplacian_variance = _impl.laplacian_variance
pearson = _impl.pearson
channel_power_means = _impl.channel_power_means
iou_pairs = _impl.iou_pairs
center_distances = _impl.center_distances
normalized_center_distances = _impl.normalized_center_distances
screen_max_ends = _impl.screen_max_ends


def using_extension() -> bool:
    return BACKEND == "c"
