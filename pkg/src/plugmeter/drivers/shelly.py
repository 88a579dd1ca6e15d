"""Driver for Shelly Gen2 smart plugs over the local HTTP RPC interface.

Talks to the device's ``/rpc`` endpoints directly on the LAN; no cloud
account involved. Parsing is factored into pure functions so captured
device responses can be replayed in tests without a socket.
"""

from __future__ import annotations

import math
from typing import Any, Optional

import requests

from plugmeter.drivers.base import (
    DEFAULT_TIMEOUT_MS,
    DeviceInfo,
    DriverError,
    DriverReading,
)

SWITCH_STATUS_PATH = "/rpc/Switch.GetStatus"
DEVICE_INFO_PATH = "/rpc/Shelly.GetDeviceInfo"


def parse_switch_status(obj: Any) -> tuple[float, Optional[float]]:
    """Extract (power_w, counter_wh) from a Switch.GetStatus response body.

    apower is mandatory; aenergy.total is optional (some firmware builds or
    relay models omit it). Unknown extra keys are ignored.
    """
    if not isinstance(obj, dict):
        raise DriverError("malformed-response", f"status body is {type(obj).__name__}, not an object")
    apower = obj.get("apower")
    if not isinstance(apower, (int, float)) or isinstance(apower, bool):
        raise DriverError(
            "malformed-response",
            f"apower missing or non-numeric: {apower!r}; body: {repr(obj)[:300]}",
        )
    power_w = float(apower)
    if not math.isfinite(power_w):
        raise DriverError("malformed-response", f"apower is not finite: {power_w!r}")
    # devices can report tiny negative power at no load; clamp, don't reject
    if power_w < 0:
        if power_w < -1.0:
            raise DriverError("malformed-response", f"apower implausibly negative: {power_w!r}")
        power_w = 0.0
    counter_wh: Optional[float] = None
    aenergy = obj.get("aenergy")
    if isinstance(aenergy, dict):
        total = aenergy.get("total")
        if isinstance(total, (int, float)) and not isinstance(total, bool) and math.isfinite(float(total)):
            counter_wh = float(total)
    return power_w, counter_wh


def parse_device_info(obj: Any) -> DeviceInfo:
    if not isinstance(obj, dict):
        raise DriverError("malformed-response", "device info body is not an object")
    model = str(obj.get("model") or obj.get("app") or "shelly-gen2")
    firmware = str(obj.get("ver") or obj.get("fw_id") or "unknown")
    capabilities = {
        "generation": obj.get("gen"),
        "device_id": obj.get("id"),
        "mac": obj.get("mac"),
    }
    return DeviceInfo(model=model, firmware=firmware, capabilities=capabilities)


class ShellyGen2Driver:
    """Polls one Shelly Gen2 plug. Reuses a single keep-alive connection."""

    def __init__(self, address: str, timeout_ms: int = DEFAULT_TIMEOUT_MS, switch_id: int = 0):
        self._base = f"http://{address}"
        self._timeout_s = timeout_ms / 1000.0
        self._switch_id = switch_id
        self._session = requests.Session()
        # one plug, one connection; no retries here, the poll loop owns retry policy
        adapter = requests.adapters.HTTPAdapter(pool_connections=1, pool_maxsize=1, max_retries=0)
        self._session.mount("http://", adapter)

    def _get_json(self, path: str, params: Optional[dict] = None) -> tuple[Any, str]:
        url = self._base + path
        try:
            resp = self._session.get(url, params=params, timeout=self._timeout_s)
        except requests.Timeout as exc:
            raise DriverError("timeout", f"no response within {self._timeout_s:.1f}s: {exc}") from exc
        except requests.ConnectionError as exc:
            raise DriverError("unreachable", f"cannot reach {self._base}: {exc}") from exc
        except requests.RequestException as exc:
            raise DriverError("unreachable", f"request failed: {exc}") from exc
        if resp.status_code != 200:
            raise DriverError("device-error", f"HTTP {resp.status_code} from {path}")
        try:
            return resp.json(), resp.text
        except ValueError as exc:
            raise DriverError("malformed-response", f"non-JSON body from {path}: {resp.text[:200]!r}") from exc

    def poll(self) -> DriverReading:
        body, text = self._get_json(SWITCH_STATUS_PATH, params={"id": self._switch_id})
        power_w, counter_wh = parse_switch_status(body)
        return DriverReading(power_w=power_w, energy_counter_wh=counter_wh, raw=text)

    def identify(self) -> DeviceInfo:
        body, _ = self._get_json(DEVICE_INFO_PATH)
        info = parse_device_info(body)
        # counter presence is a status-shape property, probe it once
        try:
            status, _ = self._get_json(SWITCH_STATUS_PATH, params={"id": self._switch_id})
            _, counter_wh = parse_switch_status(status)
            info.capabilities["has_energy_counter"] = counter_wh is not None
        except DriverError:
            pass
        return info

    def close(self) -> None:
        self._session.close()
