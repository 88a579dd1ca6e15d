"""Numba-compiled implementations of the hot kernels.

Semantics and element-wise arithmetic are kept exactly aligned with
kernels_numpy (see the note there on why reductions stay with the caller).
The loops win on year-scale 1 Hz logs where the numpy path has to
materialize several temporaries per operation.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _pair_contributions(ts_ms, power_w, gap_after, contrib, gap_dt):
    n = ts_ms.shape[0]
    for i in range(n - 1):
        dt = np.float64(ts_ms[i + 1] - ts_ms[i]) / 1000.0
        if gap_after[i]:
            contrib[i] = power_w[i] * dt
            gap_dt[i] = dt
        else:
            contrib[i] = (power_w[i] + power_w[i + 1]) * 0.5 * dt
            gap_dt[i] = 0.0


def pair_contributions_ws(
    ts_ms: np.ndarray, power_w: np.ndarray, gap_after: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    n = ts_ms.shape[0]
    if n < 2:
        empty = np.empty(0, dtype=np.float64)
        return empty, empty.copy()
    contrib = np.empty(n - 1, dtype=np.float64)
    gap_dt = np.empty(n - 1, dtype=np.float64)
    _pair_contributions(ts_ms, power_w, gap_after, contrib, gap_dt)
    return contrib, gap_dt


@njit(cache=True)
def _downsample_mask(ts_ms, power_w, n_buckets, mask):
    n = ts_ms.shape[0]
    t0 = ts_ms[0]
    span = ts_ms[n - 1] - t0
    min_idx = np.full(n_buckets, -1, dtype=np.int64)
    max_idx = np.full(n_buckets, -1, dtype=np.int64)
    min_val = np.empty(n_buckets, dtype=np.float64)
    max_val = np.empty(n_buckets, dtype=np.float64)
    for i in range(n):
        b = (ts_ms[i] - t0) * n_buckets // span
        if b >= n_buckets:
            b = n_buckets - 1
        if min_idx[b] == -1:
            min_idx[b] = i
            max_idx[b] = i
            min_val[b] = power_w[i]
            max_val[b] = power_w[i]
        else:
            # strict comparisons keep the first occurrence, matching argmin/argmax
            if power_w[i] < min_val[b]:
                min_val[b] = power_w[i]
                min_idx[b] = i
            if power_w[i] > max_val[b]:
                max_val[b] = power_w[i]
                max_idx[b] = i
    for b in range(n_buckets):
        if min_idx[b] >= 0:
            mask[min_idx[b]] = True
            mask[max_idx[b]] = True
    mask[0] = True
    mask[n - 1] = True


def downsample_mask(ts_ms: np.ndarray, power_w: np.ndarray, n_buckets: int) -> np.ndarray:
    n = ts_ms.shape[0]
    mask = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return mask
    mask[0] = True
    mask[n - 1] = True
    if n <= 2 or n_buckets < 1:
        return mask
    if int(ts_ms[-1] - ts_ms[0]) <= 0:
        return mask
    _downsample_mask(ts_ms, power_w, np.int64(n_buckets), mask)
    return mask
