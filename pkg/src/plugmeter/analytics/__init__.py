"""Numeric layer: windows, kernels, energy/stats/tariff/baseline operations."""

from plugmeter.analytics.energy import (
    AGREEMENT_THRESHOLD,
    BASELINE_MIN_SAMPLES,
    BASELINE_MIN_SPAN_S,
    ComparisonResult,
    CounterResult,
    InsufficientDataError,
    IntegrationResult,
    aggregate_summaries,
    compare_measurements,
    cost_carbon,
    counter_energy,
    cumulative_energy_wh,
    downsample,
    downsample_indices,
    gap_count,
    integrate_energy,
    measure_baseline,
    series_payload,
    summarize,
)
from plugmeter.analytics.kernels import active_backend
from plugmeter.analytics.windows import AnalyticsError, SeriesWindow

__all__ = [
    "AGREEMENT_THRESHOLD",
    "BASELINE_MIN_SAMPLES",
    "BASELINE_MIN_SPAN_S",
    "AnalyticsError",
    "ComparisonResult",
    "CounterResult",
    "InsufficientDataError",
    "IntegrationResult",
    "SeriesWindow",
    "active_backend",
    "aggregate_summaries",
    "compare_measurements",
    "cost_carbon",
    "counter_energy",
    "cumulative_energy_wh",
    "downsample",
    "downsample_indices",
    "gap_count",
    "integrate_energy",
    "measure_baseline",
    "series_payload",
    "summarize",
]
