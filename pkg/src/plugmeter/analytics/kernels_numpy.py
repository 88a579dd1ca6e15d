"""Vectorized numpy implementations of the hot kernels.

Both backends return element-wise results and leave every reduction (sum,
cumsum) to the caller, so switching backends can never change a reported
float: each output element is produced by the same IEEE operations in the
same order, and the shared reduction then sees identical inputs.
"""

from __future__ import annotations

import numpy as np


def pair_contributions_ws(
    ts_ms: np.ndarray, power_w: np.ndarray, gap_after: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair energy contributions in watt-seconds, plus per-pair gap time.

    Pair i covers [ts[i], ts[i+1]]. Normal pairs integrate a trapezoid
    (p[i]+p[i+1])/2 * dt; pairs whose left sample is flagged gap-after use
    last-value-hold p[i] * dt and report dt as gap time.
    """
    n = ts_ms.shape[0]
    if n < 2:
        empty = np.empty(0, dtype=np.float64)
        return empty, empty.copy()
    dt_s = (ts_ms[1:] - ts_ms[:-1]).astype(np.float64) / 1000.0
    gaps = gap_after[:-1]
    trap = (power_w[:-1] + power_w[1:]) * 0.5 * dt_s
    hold = power_w[:-1] * dt_s
    contrib = np.where(gaps, hold, trap)
    gap_dt = np.where(gaps, dt_s, 0.0)
    return contrib, gap_dt


def downsample_mask(ts_ms: np.ndarray, power_w: np.ndarray, n_buckets: int) -> np.ndarray:
    """Boolean keep-mask: per time bucket the first min and first max, plus endpoints.

    Bucket assignment is pure int64 arithmetic ((ts-t0)*n_buckets // span) so
    the split is bit-identical across backends and platforms.
    """
    n = ts_ms.shape[0]
    mask = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return mask
    mask[0] = True
    mask[n - 1] = True
    if n <= 2 or n_buckets < 1:
        return mask
    rel = ts_ms - ts_ms[0]
    span = int(rel[-1])
    if span <= 0:
        return mask
    buckets = np.minimum((rel * n_buckets) // span, n_buckets - 1)
    edges = np.arange(n_buckets + 1, dtype=np.int64)
    starts = np.searchsorted(buckets, edges[:-1], side="left")
    ends = np.searchsorted(buckets, edges[1:], side="left")
    for k in range(n_buckets):
        s, e = int(starts[k]), int(ends[k])
        if s >= e:
            continue
        seg = power_w[s:e]
        mask[s + int(np.argmin(seg))] = True
        mask[s + int(np.argmax(seg))] = True
    return mask
