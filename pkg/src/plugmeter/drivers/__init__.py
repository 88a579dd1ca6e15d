"""Driver registry: maps a plug's driver kind to a polling implementation.

Built-in kinds are constructed lazily so that importing this package stays
cheap. Extension kinds (``extension:<name>``) must be registered by the
embedding process before any plug using them is polled.
"""

from __future__ import annotations

from typing import Callable, Protocol

from plugmeter.drivers.base import (
    DEFAULT_TIMEOUT_MS,
    ERROR_KINDS,
    DeviceInfo,
    DriverError,
    DriverReading,
    PlugDriver,
)
from plugmeter.model import EXTENSION_PREFIX, PlugConfig

DriverFactory = Callable[[str, int], PlugDriver]

_extension_factories: dict[str, DriverFactory] = {}


def register_driver(kind: str, factory: DriverFactory) -> None:
    """Register an extension driver factory under ``extension:<name>``."""
    if not kind.startswith(EXTENSION_PREFIX):
        raise ValueError(f"extension driver kind must start with {EXTENSION_PREFIX!r}: {kind!r}")
    _extension_factories[kind] = factory


def registered_extension_kinds() -> tuple[str, ...]:
    return tuple(sorted(_extension_factories))


def get_driver(plug: PlugConfig, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> PlugDriver:
    kind = plug.driver_kind
    if kind == "shelly-gen2":
        from plugmeter.drivers.shelly import ShellyGen2Driver

        return ShellyGen2Driver(plug.address, timeout_ms=timeout_ms)
    if kind == "simulated":
        from plugmeter.drivers.simulated import SimulatedDriver

        return SimulatedDriver(plug.address, timeout_ms=timeout_ms)
    if kind.startswith(EXTENSION_PREFIX):
        factory = _extension_factories.get(kind)
        if factory is None:
            raise DriverError("unsupported", f"extension driver not registered: {kind}")
        return factory(plug.address, timeout_ms)
    raise DriverError("unsupported", f"unknown driver kind: {kind}")


__all__ = [
    "DEFAULT_TIMEOUT_MS",
    "ERROR_KINDS",
    "DeviceInfo",
    "DriverError",
    "DriverReading",
    "PlugDriver",
    "get_driver",
    "register_driver",
    "registered_extension_kinds",
]
