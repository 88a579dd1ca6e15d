"""Numeric operations: integration, statistics, tariffs, baselines, agreement.

Two independent energy routes are kept side by side on purpose: the
trapezoidal integral of the sampled power curve, and the device's own
cumulative counter. The headline figure prefers the counter when present
(the plug is the trusted sensor) and the integral is always reported
alongside so either route can audit the other. Energy is carried in
watt-hours internally; kWh appears only in summary fields that feed
presentation and tariffs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from plugmeter.analytics import kernels
from plugmeter.analytics.windows import AnalyticsError, SeriesWindow
from plugmeter.model import BaselineStats, EnergySummary, TariffSettings

BASELINE_MIN_SPAN_S = 60.0
BASELINE_MIN_SAMPLES = 30
AGREEMENT_THRESHOLD = 0.001


class InsufficientDataError(AnalyticsError):
    """The window is too short for the requested statistic."""


@dataclass(frozen=True)
class IntegrationResult:
    energy_wh: float
    gap_seconds: float
    method: str = "trapezoid"
    degenerate: bool = False


@dataclass(frozen=True)
class CounterResult:
    energy_wh: float
    resets: int
    method: str = "counter"


@dataclass(frozen=True)
class ComparisonResult:
    relative_diff: float
    verdict: str
    threshold: float

    @property
    def agree(self) -> bool:
        return self.verdict == "agree"


def integrate_energy(window: SeriesWindow) -> IntegrationResult:
    """Trapezoidal energy over the window, last-value-hold across flagged gaps."""
    if window.sample_count < 2:
        return IntegrationResult(0.0, 0.0, degenerate=True)
    contrib, gap_dt = kernels.pair_contributions_ws(
        window.ts_ms, window.power_w, window.gap_after
    )
    energy_wh = float(np.sum(contrib)) / 3600.0
    gap_seconds = float(np.sum(gap_dt))
    return IntegrationResult(energy_wh, gap_seconds)


def cumulative_energy_wh(window: SeriesWindow) -> np.ndarray:
    """Per-sample running energy in Wh; starts at 0, same pair rules as integrate."""
    n = window.sample_count
    out = np.zeros(n, dtype=np.float64)
    if n < 2:
        return out
    contrib, _ = kernels.pair_contributions_ws(window.ts_ms, window.power_w, window.gap_after)
    np.cumsum(contrib / 3600.0, out=out[1:])
    return out


def counter_energy(window: SeriesWindow) -> Optional[CounterResult]:
    """Energy from the device counter delta, or None when counters are absent.

    A decreasing counter marks a device reset: the window splits there and
    the per-segment deltas are summed, with the reset count annotated.
    """
    valid = window.counter_wh[~np.isnan(window.counter_wh)]
    if valid.shape[0] < 2:
        return None
    diffs = np.diff(valid)
    reset_positions = np.nonzero(diffs < 0)[0]
    if reset_positions.shape[0] == 0:
        return CounterResult(float(valid[-1] - valid[0]), resets=0)
    energy = 0.0
    seg_start = 0
    for pos in reset_positions:
        energy += float(valid[pos] - valid[seg_start])
        seg_start = pos + 1
    energy += float(valid[-1] - valid[seg_start])
    return CounterResult(energy, resets=int(reset_positions.shape[0]))


def cost_carbon(energy_kwh: float, tariff: TariffSettings) -> tuple[float, float]:
    """(cost, carbon grams) for the given energy; plain products, nothing hidden."""
    return energy_kwh * tariff.price_per_kwh, energy_kwh * tariff.carbon_g_per_kwh


def gap_count(window: SeriesWindow) -> int:
    if window.sample_count < 2:
        return 0
    return int(np.count_nonzero(window.gap_after[:-1]))


def summarize(
    window: SeriesWindow,
    tariff: Optional[TariffSettings] = None,
    baseline: Optional[BaselineStats] = None,
    experiment_id: Optional[str] = None,
) -> EnergySummary:
    """Full statistics for one window; the EnergySummary everything else reuses."""
    if tariff is None:
        tariff = TariffSettings()
    if baseline is not None and baseline.plug_id != window.plug_id:
        raise AnalyticsError(
            f"baseline is for plug {baseline.plug_id!r}, window is for {window.plug_id!r}"
        )
    n = window.sample_count
    if n:
        min_w = float(np.min(window.power_w))
        max_w = float(np.max(window.power_w))
        # pairwise summation can push the mean of a constant series a few
        # ULP past the extremes; clamp to keep min <= mean <= max honest
        mean_w = min(max(float(np.mean(window.power_w)), min_w), max_w)
        std_w = float(np.std(window.power_w))
    else:
        mean_w = std_w = min_w = max_w = 0.0

    integrated = integrate_energy(window)
    counter = counter_energy(window)
    kwh_integrated = integrated.energy_wh / 1000.0
    kwh_counter = counter.energy_wh / 1000.0 if counter is not None else None
    headline_kwh = kwh_counter if kwh_counter is not None else kwh_integrated

    cost, carbon_g = cost_carbon(headline_kwh, tariff)

    baseline_power_w: Optional[float] = None
    net_kwh: Optional[float] = None
    if baseline is not None:
        baseline_power_w = baseline.mean_w
        duration_s = window.duration_s
        baseline_kwh = baseline.mean_w * duration_s / 3_600_000.0
        net_kwh = max(0.0, headline_kwh - baseline_kwh)

    return EnergySummary(
        experiment_id=experiment_id if experiment_id is not None else window.plug_id,
        duration_s=window.duration_s,
        sample_count=n,
        mean_power_w=mean_w,
        std_power_w=std_w,
        min_power_w=min_w,
        max_power_w=max_w,
        energy_kwh_integrated=kwh_integrated,
        energy_kwh_counter=kwh_counter,
        energy_kwh=headline_kwh,
        cost=cost,
        carbon_g=carbon_g,
        gap_count=gap_count(window),
        gap_seconds=integrated.gap_seconds,
        baseline_power_w=baseline_power_w,
        net_energy_kwh=net_kwh,
    )


def aggregate_summaries(
    summaries: Sequence[EnergySummary], experiment_id: str = "aggregate"
) -> EnergySummary:
    """Column-wise aggregate row: sums for energy/cost/carbon/duration/gaps,
    exact combined moments for the power statistics."""
    if not summaries:
        raise AnalyticsError("nothing to aggregate")
    total_n = sum(s.sample_count for s in summaries)
    nonempty = [s for s in summaries if s.sample_count > 0]
    if total_n > 0:
        min_w = min(s.min_power_w for s in nonempty)
        max_w = max(s.max_power_w for s in nonempty)
        mean_w = sum(s.sample_count * s.mean_power_w for s in nonempty) / total_n
        mean_w = min(max(mean_w, min_w), max_w)
        # E[x^2] per member is std^2 + mean^2; combining them is exact
        second = sum(
            s.sample_count * (s.std_power_w**2 + s.mean_power_w**2) for s in nonempty
        ) / total_n
        std_w = math.sqrt(max(0.0, second - mean_w**2))
    else:
        mean_w = std_w = min_w = max_w = 0.0

    counters = [s.energy_kwh_counter for s in summaries]
    kwh_counter = sum(counters) if all(c is not None for c in counters) else None
    nets = [s.net_energy_kwh for s in summaries]
    net_kwh = sum(nets) if all(v is not None for v in nets) else None

    return EnergySummary(
        experiment_id=experiment_id,
        duration_s=sum(s.duration_s for s in summaries),
        sample_count=total_n,
        mean_power_w=mean_w,
        std_power_w=std_w,
        min_power_w=min_w,
        max_power_w=max_w,
        energy_kwh_integrated=sum(s.energy_kwh_integrated for s in summaries),
        energy_kwh_counter=kwh_counter,
        energy_kwh=sum(s.energy_kwh for s in summaries),
        cost=sum(s.cost for s in summaries),
        carbon_g=sum(s.carbon_g for s in summaries),
        gap_count=sum(s.gap_count for s in summaries),
        gap_seconds=sum(s.gap_seconds for s in summaries),
        baseline_power_w=None,
        net_energy_kwh=net_kwh,
    )


def measure_baseline(window: SeriesWindow) -> BaselineStats:
    """Idle-power statistics in the mean-plus-minus-half-spread style."""
    if window.span_s < BASELINE_MIN_SPAN_S or window.sample_count < BASELINE_MIN_SAMPLES:
        raise InsufficientDataError(
            f"baseline needs >= {BASELINE_MIN_SPAN_S:.0f} s and >= {BASELINE_MIN_SAMPLES} samples, "
            f"got {window.span_s:.1f} s / {window.sample_count}"
        )
    power = window.power_w
    mean_w = float(np.mean(power))
    half_spread = (float(np.max(power)) - float(np.min(power))) / 2.0
    return BaselineStats(
        plug_id=window.plug_id,
        mean_w=mean_w,
        half_spread_w=half_spread,
        sample_count=window.sample_count,
        window_s=window.span_s,
    )


def compare_measurements(
    a: EnergySummary,
    b: EnergySummary,
    threshold: float = AGREEMENT_THRESHOLD,
    duration_tolerance_s: Optional[float] = None,
) -> ComparisonResult:
    """Relative difference of the headline energies with an agree/disagree verdict.

    Summaries carry no absolute bounds, so the same-window precondition is
    checked through durations: pass the coarser poll interval (seconds) as
    duration_tolerance_s to enforce it.
    """
    if duration_tolerance_s is not None and abs(a.duration_s - b.duration_s) > duration_tolerance_s:
        raise AnalyticsError(
            f"windows differ by {abs(a.duration_s - b.duration_s):.3f} s, "
            f"more than the allowed {duration_tolerance_s:.3f} s"
        )
    ea, eb = a.energy_kwh, b.energy_kwh
    top = max(ea, eb)
    if top == 0.0:
        rel = 0.0 if ea == eb else 1.0
    else:
        rel = abs(ea - eb) / top
    verdict = "agree" if rel < threshold else "disagree"
    return ComparisonResult(rel, verdict, threshold)


def downsample_indices(window: SeriesWindow, max_points: int) -> np.ndarray:
    """Indices of the samples a size-limited view keeps (first min and first
    max per time bucket, endpoints always); at most 2 * max_points of them."""
    if max_points < 2:
        raise AnalyticsError(f"max_points must be >= 2, got {max_points}")
    n = window.sample_count
    if n <= 2 * max_points:
        return np.arange(n, dtype=np.int64)
    mask = kernels.downsample_mask(window.ts_ms, window.power_w, max_points - 1)
    return np.nonzero(mask)[0].astype(np.int64)


def downsample(window: SeriesWindow, max_points: int) -> SeriesWindow:
    indices = downsample_indices(window, max_points)
    if indices.shape[0] == window.sample_count:
        return window
    return window.take(indices)


def series_payload(window: SeriesWindow, max_points: int = 2000) -> dict:
    """The chart-ready JSON body: downsampled power points plus the cumulative
    energy curve evaluated on the full series and sampled at the kept points
    (so the last cumulative value is the exact window total)."""
    indices = downsample_indices(window, max_points)
    cum_kwh = cumulative_energy_wh(window) / 1000.0
    ts = window.ts_ms[indices]
    kept_gaps = window.gap_after[indices]
    return {
        "plug_id": window.plug_id,
        "t0_ms": window.t0_ms,
        "t1_ms": window.t1_ms,
        "sample_count": window.sample_count,
        "returned_points": int(indices.shape[0]),
        "power": {
            "ts_ms": ts.tolist(),
            "w": window.power_w[indices].tolist(),
        },
        "cumulative": {
            "ts_ms": ts.tolist(),
            "kwh": cum_kwh[indices].tolist(),
        },
        "gap_ts_ms": ts[kept_gaps].tolist(),
    }
