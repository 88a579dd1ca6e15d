"""Smart-plug energy metering for compute experiments.

The package polls smart power plugs over the local network, logs timestamped
power samples scoped to named experiments, computes energy/cost/carbon
statistics with idle-baseline handling, serves a live monitoring API, and
emits standardized shareable reports.
"""

from plugmeter.model import (
    BaselineStats,
    EnergySummary,
    ExperimentSession,
    PlugConfig,
    PlugmeterError,
    PowerSample,
    TariffSettings,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BaselineStats",
    "EnergySummary",
    "ExperimentSession",
    "PlugConfig",
    "PlugmeterError",
    "PowerSample",
    "TariffSettings",
]
