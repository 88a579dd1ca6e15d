"""Columnar view of a sample series for the numeric operations.

A SeriesWindow is the array-of-columns form of an ordered PowerSample list
plus its window bounds [t0_ms, t1_ms]. Columns are read-only numpy arrays;
missing device counters become NaN. Construction validates ordering once so
every downstream operation can assume sorted input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from plugmeter.model import PlugmeterError, PowerSample


class AnalyticsError(PlugmeterError):
    """Caller-side misuse of the numeric API (unsorted input, plug mismatch...)."""


@dataclass(frozen=True, eq=False)
class SeriesWindow:
    plug_id: str
    ts_ms: np.ndarray
    power_w: np.ndarray
    counter_wh: np.ndarray
    gap_after: np.ndarray
    t0_ms: int
    t1_ms: int

    def __post_init__(self) -> None:
        n = self.ts_ms.shape[0]
        if not (self.power_w.shape[0] == self.counter_wh.shape[0] == self.gap_after.shape[0] == n):
            raise AnalyticsError("column lengths differ")
        if self.t1_ms < self.t0_ms:
            raise AnalyticsError(f"window bounds reversed: [{self.t0_ms}, {self.t1_ms}]")
        if n:
            if np.any(np.diff(self.ts_ms) < 0):
                raise AnalyticsError("samples are not sorted by ts")
            if int(self.ts_ms[0]) < self.t0_ms or int(self.ts_ms[-1]) > self.t1_ms:
                raise AnalyticsError("samples fall outside the window bounds")
        for arr in (self.ts_ms, self.power_w, self.counter_wh, self.gap_after):
            arr.setflags(write=False)

    @property
    def sample_count(self) -> int:
        return int(self.ts_ms.shape[0])

    @property
    def duration_s(self) -> float:
        return (self.t1_ms - self.t0_ms) / 1000.0

    @property
    def span_s(self) -> float:
        """Seconds between the first and last sample (0 for <2 samples)."""
        if self.sample_count < 2:
            return 0.0
        return float(self.ts_ms[-1] - self.ts_ms[0]) / 1000.0

    @classmethod
    def from_samples(
        cls,
        samples: Sequence[PowerSample],
        t0_ms: Optional[int] = None,
        t1_ms: Optional[int] = None,
        plug_id: Optional[str] = None,
    ) -> "SeriesWindow":
        """Build a window from parsed samples, bounds defaulting to the data span."""
        n = len(samples)
        if n and plug_id is None:
            plug_id = samples[0].plug_id
        if plug_id is None:
            plug_id = "unknown"
        ts = np.fromiter((s.ts for s in samples), dtype=np.int64, count=n)
        power = np.fromiter((s.power_w for s in samples), dtype=np.float64, count=n)
        counter = np.fromiter(
            (math.nan if s.energy_counter_wh is None else s.energy_counter_wh for s in samples),
            dtype=np.float64,
            count=n,
        )
        gaps = np.fromiter(("gap-after" in s.flags for s in samples), dtype=np.bool_, count=n)
        if t0_ms is None:
            t0_ms = int(ts[0]) if n else 0
        if t1_ms is None:
            t1_ms = int(ts[-1]) if n else t0_ms
        return cls(plug_id, ts, power, counter, gaps, int(t0_ms), int(t1_ms))

    def sliced(self, t0_ms: int, t1_ms: int) -> "SeriesWindow":
        """Sub-window containing the samples with t0_ms <= ts <= t1_ms."""
        if t1_ms < t0_ms:
            raise AnalyticsError(f"bad slice range: [{t0_ms}, {t1_ms}]")
        lo = int(np.searchsorted(self.ts_ms, t0_ms, side="left"))
        hi = int(np.searchsorted(self.ts_ms, t1_ms, side="right"))
        return SeriesWindow(
            self.plug_id,
            self.ts_ms[lo:hi],
            self.power_w[lo:hi],
            self.counter_wh[lo:hi],
            self.gap_after[lo:hi],
            int(t0_ms),
            int(t1_ms),
        )

    def take(self, indices: np.ndarray) -> "SeriesWindow":
        """Window keeping only the given (sorted) sample indices; bounds unchanged."""
        return SeriesWindow(
            self.plug_id,
            self.ts_ms[indices].copy(),
            self.power_w[indices].copy(),
            self.counter_wh[indices].copy(),
            self.gap_after[indices].copy(),
            self.t0_ms,
            self.t1_ms,
        )
