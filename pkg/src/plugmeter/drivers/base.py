"""Driver contract for reading power sensors over the network.

A driver performs exactly one network round-trip per poll and either returns
a validated DriverReading or raises DriverError with a classified kind. New
plug models are supported by implementing PlugDriver and registering the
class under an ``extension:<name>`` driver kind.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Protocol, runtime_checkable

from plugmeter.model import PlugmeterError

DEFAULT_TIMEOUT_MS = 2000

ERROR_KINDS = ("unreachable", "timeout", "malformed-response", "device-error", "unsupported")


class DriverError(PlugmeterError):
    """A poll or identify call failed; ``kind`` classifies every failure path."""

    def __init__(self, kind: str, detail: str, occurred_at: Optional[int] = None):
        if kind not in ERROR_KINDS:
            raise ValueError(f"unknown DriverError kind: {kind!r}")
        self.kind = kind
        self.detail = detail
        self.occurred_at = int(time.time() * 1000) if occurred_at is None else occurred_at
        super().__init__(f"[{kind}] {detail}")


@dataclass(frozen=True)
class DriverReading:
    """One validated sensor reading plus the verbatim response for audit."""

    power_w: float
    energy_counter_wh: Optional[float] = None
    device_ts: Optional[float] = None
    raw: str = ""

    def __post_init__(self) -> None:
        if not math.isfinite(self.power_w) or self.power_w < 0:
            raise ValueError(f"power_w must be finite and >= 0, got {self.power_w!r}")
        if self.energy_counter_wh is not None and (
            not math.isfinite(self.energy_counter_wh) or self.energy_counter_wh < 0
        ):
            raise ValueError(f"energy_counter_wh must be finite and >= 0, got {self.energy_counter_wh!r}")


@dataclass(frozen=True)
class DeviceInfo:
    """Device descriptor from identify(); capabilities gate downstream math."""

    model: str
    firmware: str
    capabilities: dict[str, bool] = field(default_factory=dict)

    @property
    def has_energy_counter(self) -> bool:
        return bool(self.capabilities.get("has_energy_counter", False))

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "firmware": self.firmware,
            "capabilities": dict(self.capabilities),
        }


@runtime_checkable
class PlugDriver(Protocol):
    """What the collector needs from any plug driver.

    Implementations are stateless between calls (connection reuse is fine)
    and must complete or fail within their configured timeout.
    """

    def poll(self) -> DriverReading:
        """One network round-trip; returns a reading or raises DriverError."""
        ...

    def identify(self) -> DeviceInfo:
        """Fetch the device descriptor; raises DriverError on failure."""
        ...

    def close(self) -> None:
        """Release any cached connections."""
        ...
