"""Core domain types shared by every part of the metering pipeline.

All types are immutable value objects; construction validates the hard
invariants so downstream code can trust instances without re-checking.
Power is carried in watts and energy in watt-hours internally; kilowatt-hours
appear only at presentation boundaries.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Any, Optional

TOKEN_RE = re.compile(r"^[a-z0-9-]{1,64}$")

MIN_POLL_INTERVAL_MS = 100
MAX_POLL_INTERVAL_MS = 3_600_000

BUILTIN_DRIVER_KINDS = ("shelly-gen2", "simulated")
EXTENSION_PREFIX = "extension:"

SAMPLE_FLAGS = frozenset({"gap-after", "estimated"})


class PlugmeterError(Exception):
    """Base class for every error this package raises on purpose."""


def is_token(value: Any) -> bool:
    """True if value is a usable identifier: 1-64 chars of [a-z0-9-]."""
    return isinstance(value, str) and bool(TOKEN_RE.match(value))


def check_token(value: Any, what: str) -> str:
    if not is_token(value):
        raise ValueError(f"{what} must be 1-64 chars of [a-z0-9-], got {value!r}")
    return value


def _check_finite_nonneg(value: Any, what: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{what} must be a number, got {value!r}") from None
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{what} must be finite and >= 0, got {value!r}")
    return value


def is_known_driver_kind(kind: str) -> bool:
    return kind in BUILTIN_DRIVER_KINDS or (
        isinstance(kind, str) and kind.startswith(EXTENSION_PREFIX) and len(kind) > len(EXTENSION_PREFIX)
    )


@dataclass(frozen=True)
class PlugConfig:
    """One configured smart plug: identity, driver, address, poll cadence."""

    plug_id: str
    driver_kind: str
    address: str
    poll_interval_ms: int = 1000
    label: str = ""

    def __post_init__(self) -> None:
        check_token(self.plug_id, "plug_id")
        if not is_known_driver_kind(self.driver_kind):
            raise ValueError(
                f"unknown driver_kind {self.driver_kind!r} "
                f"(expected one of {BUILTIN_DRIVER_KINDS} or '{EXTENSION_PREFIX}<name>')"
            )
        if not isinstance(self.address, str) or not self.address:
            raise ValueError("address must be a non-empty host or host:port string")
        interval = self.poll_interval_ms
        if not isinstance(interval, int) or isinstance(interval, bool):
            raise ValueError(f"poll_interval_ms must be an integer, got {interval!r}")
        if not (MIN_POLL_INTERVAL_MS <= interval <= MAX_POLL_INTERVAL_MS):
            raise ValueError(
                f"poll_interval_ms must be within [{MIN_POLL_INTERVAL_MS}, "
                f"{MAX_POLL_INTERVAL_MS}] ms, got {interval}"
            )

    def host_port(self, default_port: int = 80) -> tuple[str, int]:
        """Split the address into (host, port)."""
        if ":" in self.address:
            host, _, port = self.address.rpartition(":")
            return host, int(port)
        return self.address, default_port

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.plug_id,
            "driver": self.driver_kind,
            "address": self.address,
            "interval_ms": self.poll_interval_ms,
            "label": self.label,
        }


@dataclass(frozen=True)
class PowerSample:
    """One timestamped reading from one plug.

    ``ts`` is wall-clock milliseconds since the Unix epoch, assigned by the
    collecting host at receipt (device clocks are not trusted). ``seq`` is
    1-based and strictly increasing within one stream file.
    """

    ts: int
    seq: int
    plug_id: str
    power_w: float
    energy_counter_wh: Optional[float] = None
    flags: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not isinstance(self.ts, int):
            object.__setattr__(self, "ts", int(self.ts))
        if not isinstance(self.seq, int) or self.seq < 1:
            raise ValueError(f"seq must be a positive integer, got {self.seq!r}")
        _check_finite_nonneg(self.power_w, "power_w")
        if self.energy_counter_wh is not None:
            _check_finite_nonneg(self.energy_counter_wh, "energy_counter_wh")
        flags = frozenset(self.flags)
        unknown = flags - SAMPLE_FLAGS
        if unknown:
            raise ValueError(f"unknown sample flags: {sorted(unknown)}")
        object.__setattr__(self, "flags", flags)

    def to_line(self) -> str:
        """Serialize to the pinned one-line JSON log format.

        Key order is part of the on-disk contract (docs/log-format.md):
        ts, seq, plug, w, then optional wh and flags.
        """
        obj: dict[str, Any] = {
            "ts": self.ts,
            "seq": self.seq,
            "plug": self.plug_id,
            "w": self.power_w,
        }
        if self.energy_counter_wh is not None:
            obj["wh"] = self.energy_counter_wh
        if self.flags:
            obj["flags"] = sorted(self.flags)
        return json.dumps(obj, separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> "PowerSample":
        obj = json.loads(line)
        if not isinstance(obj, dict):
            raise ValueError("sample line is not a JSON object")
        try:
            return cls(
                ts=int(obj["ts"]),
                seq=int(obj["seq"]),
                plug_id=obj["plug"],
                power_w=float(obj["w"]),
                energy_counter_wh=(float(obj["wh"]) if "wh" in obj else None),
                flags=frozenset(obj.get("flags", ())),
            )
        except KeyError as exc:
            raise ValueError(f"sample line missing key {exc}") from None

    def with_flags(self, *extra: str) -> "PowerSample":
        return replace(self, flags=self.flags | frozenset(extra))


@dataclass(frozen=True)
class ExperimentSession:
    """A named, bounded measurement window binding samples to an experiment.

    ``end_ts`` is absent while the session is running (or was never closed
    because the collector died; such sessions are recoverable as unclosed).
    """

    experiment_id: str
    session_id: str
    plug_id: str
    start_ts: int
    poll_interval_ms: float = 1000
    end_ts: Optional[int] = None
    notes: str = ""
    error_count: int = 0

    def __post_init__(self) -> None:
        check_token(self.experiment_id, "experiment_id")
        check_token(self.session_id, "session_id")
        check_token(self.plug_id, "plug_id")
        if self.end_ts is not None and self.end_ts < self.start_ts:
            raise ValueError(
                f"end_ts {self.end_ts} precedes start_ts {self.start_ts}"
            )
        if self.error_count < 0:
            raise ValueError("error_count must be >= 0")

    @property
    def running(self) -> bool:
        return self.end_ts is None

    def closed(self, end_ts: int, error_count: Optional[int] = None) -> "ExperimentSession":
        return replace(
            self,
            end_ts=end_ts,
            error_count=self.error_count if error_count is None else error_count,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "experiment_id": self.experiment_id,
            "session_id": self.session_id,
            "plug_id": self.plug_id,
            "start_ts": self.start_ts,
            "end_ts": self.end_ts,
            "poll_interval_ms": self.poll_interval_ms,
            "notes": self.notes,
            "error_count": self.error_count,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ExperimentSession":
        return cls(
            experiment_id=obj["experiment_id"],
            session_id=obj["session_id"],
            plug_id=obj["plug_id"],
            start_ts=int(obj["start_ts"]),
            end_ts=(int(obj["end_ts"]) if obj.get("end_ts") is not None else None),
            poll_interval_ms=obj.get("poll_interval_ms", 1000),
            notes=obj.get("notes", ""),
            error_count=int(obj.get("error_count", 0)),
        )


@dataclass(frozen=True)
class TariffSettings:
    """Price and carbon intensity per kWh used for what-if accounting."""

    price_per_kwh: float = 0.30
    carbon_g_per_kwh: float = 400.0
    currency_label: str = "EUR"

    def __post_init__(self) -> None:
        _check_finite_nonneg(self.price_per_kwh, "price_per_kwh")
        _check_finite_nonneg(self.carbon_g_per_kwh, "carbon_g_per_kwh")

    def to_dict(self) -> dict[str, Any]:
        return {
            "price_per_kwh": self.price_per_kwh,
            "carbon_g_per_kwh": self.carbon_g_per_kwh,
            "currency_label": self.currency_label,
        }


@dataclass(frozen=True)
class EnergySummary:
    """Per-experiment (or per-session) statistics over recorded samples.

    ``energy_kwh`` is the headline figure: the device counter delta when one
    is available, otherwise the trapezoidal integral. Both routes are kept so
    one can audit the other.
    """

    experiment_id: str
    duration_s: float
    sample_count: int
    mean_power_w: float
    std_power_w: float
    min_power_w: float
    max_power_w: float
    energy_kwh_integrated: float
    energy_kwh_counter: Optional[float]
    energy_kwh: float
    cost: float
    carbon_g: float
    gap_count: int
    gap_seconds: float
    baseline_power_w: Optional[float] = None
    net_energy_kwh: Optional[float] = None

    def __post_init__(self) -> None:
        if self.sample_count > 0 and not (
            self.min_power_w <= self.mean_power_w <= self.max_power_w
        ):
            raise ValueError(
                f"power stats out of order: min {self.min_power_w}, "
                f"mean {self.mean_power_w}, max {self.max_power_w}"
            )
        if self.energy_kwh_integrated < 0:
            raise ValueError("integrated energy must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "experiment_id": self.experiment_id,
            "duration_s": self.duration_s,
            "sample_count": self.sample_count,
            "mean_power_w": self.mean_power_w,
            "std_power_w": self.std_power_w,
            "min_power_w": self.min_power_w,
            "max_power_w": self.max_power_w,
            "energy_kwh_integrated": self.energy_kwh_integrated,
            "energy_kwh_counter": self.energy_kwh_counter,
            "energy_kwh": self.energy_kwh,
            "cost": self.cost,
            "carbon_g": self.carbon_g,
            "gap_count": self.gap_count,
            "gap_seconds": self.gap_seconds,
            "baseline_power_w": self.baseline_power_w,
            "net_energy_kwh": self.net_energy_kwh,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "EnergySummary":
        return cls(**obj)


@dataclass(frozen=True)
class BaselineStats:
    """Idle power for one plug, reported as mean ± half the observed spread."""

    plug_id: str
    mean_w: float
    half_spread_w: float
    sample_count: int
    window_s: float

    def __post_init__(self) -> None:
        check_token(self.plug_id, "plug_id")
        if self.half_spread_w < 0:
            raise ValueError("half_spread_w must be >= 0")
        if self.sample_count < 2:
            raise ValueError("sample_count must be >= 2")

    def format(self) -> str:
        """Render in the conventional idle-consumption style, e.g. '69.15 ± 2.45 W'."""
        return f"{self.mean_w:.2f} ± {self.half_spread_w:.2f} W"

    def to_dict(self) -> dict[str, Any]:
        return {
            "plug_id": self.plug_id,
            "mean_w": self.mean_w,
            "half_spread_w": self.half_spread_w,
            "sample_count": self.sample_count,
            "window_s": self.window_s,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "BaselineStats":
        return cls(
            plug_id=obj["plug_id"],
            mean_w=float(obj["mean_w"]),
            half_spread_w=float(obj["half_spread_w"]),
            sample_count=int(obj["sample_count"]),
            window_s=float(obj["window_s"]),
        )
