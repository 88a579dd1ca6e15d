"""Driver speaking the embedded simulator's plain status shape."""

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


class SimulatedDriver:
    """Polls a simulator plug via GET /sim/status and /sim/info."""

    def __init__(self, address: str, timeout_ms: int = DEFAULT_TIMEOUT_MS):
        self._base = f"http://{address}"
        self._timeout_s = timeout_ms / 1000.0
        self._session = requests.Session()
        adapter = requests.adapters.HTTPAdapter(pool_connections=1, pool_maxsize=1, max_retries=0)
        self._session.mount("http://", adapter)

    def _get_json(self, path: str) -> tuple[Any, str]:
        try:
            resp = self._session.get(self._base + path, timeout=self._timeout_s)
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
        body, text = self._get_json("/sim/status")
        if not isinstance(body, dict):
            raise DriverError("malformed-response", f"status body is not an object: {text[:200]!r}")
        power = body.get("power_w")
        if not isinstance(power, (int, float)) or isinstance(power, bool) or not math.isfinite(float(power)):
            raise DriverError("malformed-response", f"power_w missing or non-numeric: {power!r}; body: {text[:200]!r}")
        counter: Optional[float] = None
        energy = body.get("energy_wh")
        if isinstance(energy, (int, float)) and not isinstance(energy, bool):
            counter = float(energy)
        return DriverReading(power_w=max(0.0, float(power)), energy_counter_wh=counter, raw=text)

    def identify(self) -> DeviceInfo:
        body, _ = self._get_json("/sim/info")
        if not isinstance(body, dict):
            raise DriverError("malformed-response", "info body is not an object")
        return DeviceInfo(
            model=str(body.get("model", "simulated")),
            firmware=str(body.get("firmware", "sim")),
            capabilities={"has_energy_counter": bool(body.get("has_energy_counter", False))},
        )

    def close(self) -> None:
        self._session.close()
