"""Embedded plug simulator for hardware-free testing and demos.

Each simulated plug is served by its own HTTP listener, like a real device,
and answers in two shapes: the Shelly Gen2 RPC status shape (so the real
Shelly driver is exercised end to end) and a plain shape for the
``simulated`` driver. Waveform evaluation is deterministic given the
scenario seed; the emulated energy counter is the exact closed-form integral
of the waveform, independent of measurement noise.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Optional
from urllib.parse import urlparse

from plugmeter.drivers.waveforms import ScenarioError, Waveform, parse_waveform

SIM_MODEL = "plugmeter-sim-1"
SIM_FIRMWARE = "sim-0.1"


@dataclass(frozen=True)
class SimPlugSpec:
    plug_id: str
    waveform: Waveform
    noise_sigma_w: float = 0.0
    dropout_p: float = 0.0
    counter: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "plug_id": self.plug_id,
            "waveform": self.waveform.to_dict(),
            "noise_sigma_w": self.noise_sigma_w,
            "dropout_p": self.dropout_p,
            "counter": self.counter,
        }


@dataclass(frozen=True)
class SimScenario:
    plugs: tuple[SimPlugSpec, ...]
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {"seed": self.seed, "plugs": [p.to_dict() for p in self.plugs]}


def parse_scenario(obj: Any) -> SimScenario:
    if not isinstance(obj, dict):
        raise ScenarioError("scenario must be a JSON object")
    seed = obj.get("seed", 0)
    if not isinstance(seed, int):
        raise ScenarioError(f"seed must be an integer, got {seed!r}")
    raw_plugs = obj.get("plugs")
    if not isinstance(raw_plugs, list) or not raw_plugs:
        raise ScenarioError("scenario needs a non-empty 'plugs' array")
    plugs = []
    seen = set()
    for i, entry in enumerate(raw_plugs):
        if not isinstance(entry, dict):
            raise ScenarioError(f"plugs[{i}] must be an object")
        plug_id = entry.get("plug_id")
        if not isinstance(plug_id, str) or not plug_id:
            raise ScenarioError(f"plugs[{i}].plug_id required")
        if plug_id in seen:
            raise ScenarioError(f"duplicate simulated plug_id: {plug_id}")
        seen.add(plug_id)
        waveform = parse_waveform(entry.get("waveform"))
        noise = float(entry.get("noise_sigma_w", 0.0))
        dropout = float(entry.get("dropout_p", 0.0))
        if not (0.0 <= dropout <= 1.0):
            raise ScenarioError(f"plugs[{i}].dropout_p must be within [0, 1]")
        if noise < 0:
            raise ScenarioError(f"plugs[{i}].noise_sigma_w must be >= 0")
        plugs.append(
            SimPlugSpec(plug_id, waveform, noise, dropout, bool(entry.get("counter", True)))
        )
    return SimScenario(tuple(plugs), seed)


def load_scenario(path: str | Path) -> SimScenario:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file is not valid JSON: {exc}") from None
    return parse_scenario(obj)


class SimPlugState:
    """Runtime state of one simulated plug; safe for concurrent requests."""

    def __init__(self, spec: SimPlugSpec, seed: int):
        self.spec = spec
        self._rng = random.Random(f"{seed}:{spec.plug_id}")
        self._dropout_p = spec.dropout_p
        self._lock = threading.Lock()

    def reading_at(self, t_s: float) -> tuple[float, Optional[float]]:
        """(power_w, counter_wh) at waveform time t; noise draws are sequential."""
        power = self.spec.waveform.value(t_s)
        if self.spec.noise_sigma_w > 0:
            with self._lock:
                power += self._rng.gauss(0.0, self.spec.noise_sigma_w)
        power = max(0.0, power)
        counter = self.spec.waveform.counter_wh(t_s) if self.spec.counter else None
        return power, counter

    def should_drop(self) -> bool:
        with self._lock:
            p = self._dropout_p
            return p > 0 and self._rng.random() < p

    def set_dropout(self, p: float) -> None:
        with self._lock:
            self._dropout_p = max(0.0, min(1.0, p))


def _shelly_status(plug_id: str, power_w: float, counter_wh: Optional[float], now_s: float) -> dict:
    body: dict[str, Any] = {
        "id": 0,
        "source": "sim",
        "output": True,
        "apower": round(power_w, 3),
        "voltage": 230.0,
        "freq": 50.0,
        "current": round(power_w / 230.0, 3),
        "temperature": {"tC": 32.5, "tF": 90.5},
    }
    if counter_wh is not None:
        body["aenergy"] = {
            "total": counter_wh,
            "by_minute": [],
            "minute_ts": int(now_s),
        }
    return body


def _make_handler(service: "SimulatorService", state: SimPlugState):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        # headers and body go out as separate writes; without TCP_NODELAY the
        # second one stalls ~40 ms behind the peer's delayed ACK, which caps
        # polling far below the rates the collector is specified to sustain
        disable_nagle_algorithm = True

        def log_message(self, fmt, *args):  # quiet by design
            pass

        def _send_json(self, obj: Any, status: int = 200) -> None:
            body = json.dumps(obj).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _drop(self) -> None:
            # emulate a WiFi dropout: slam the connection shut, no response
            self.close_connection = True
            try:
                self.connection.close()
            except OSError:
                pass

        def do_GET(self) -> None:
            if state.should_drop():
                self._drop()
                return
            path = urlparse(self.path).path
            t = service.now_s()
            if path == "/rpc/Switch.GetStatus":
                power, counter = state.reading_at(t)
                self._send_json(_shelly_status(state.spec.plug_id, power, counter, time.time()))
            elif path == "/rpc/Shelly.GetDeviceInfo":
                self._send_json(
                    {
                        "name": f"sim-{state.spec.plug_id}",
                        "id": f"plugmeter-sim-{state.spec.plug_id}",
                        "mac": "000000000000",
                        "model": SIM_MODEL,
                        "gen": 2,
                        "fw_id": SIM_FIRMWARE,
                        "ver": SIM_FIRMWARE,
                        "app": "PlusPlugS",
                    }
                )
            elif path == "/sim/status":
                power, counter = state.reading_at(t)
                body: dict[str, Any] = {
                    "plug_id": state.spec.plug_id,
                    "power_w": power,
                    "sim_t_s": t,
                }
                if counter is not None:
                    body["energy_wh"] = counter
                self._send_json(body)
            elif path == "/sim/info":
                self._send_json(
                    {
                        "plug_id": state.spec.plug_id,
                        "model": SIM_MODEL,
                        "firmware": SIM_FIRMWARE,
                        "has_energy_counter": state.spec.counter,
                    }
                )
            elif path == "/sim/scenario":
                self._send_json(state.spec.to_dict())
            else:
                self._send_json({"error": "not found"}, 404)

        def do_POST(self) -> None:
            path = urlparse(self.path).path
            if path == "/sim/dropout":
                length = int(self.headers.get("Content-Length", "0"))
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                    state.set_dropout(float(body["p"]))
                except (ValueError, KeyError, TypeError):
                    self._send_json({"error": "expected {\"p\": <0..1>}"}, 400)
                    return
                self._send_json({"ok": True})
            else:
                self._send_json({"error": "not found"}, 404)

    return Handler


class SimulatorService:
    """Serves every plug of a scenario, one HTTP listener per plug.

    With base_port=0 each plug gets an ephemeral port; addresses() reports
    the final host:port per plug. Usable as a context manager.
    """

    def __init__(self, scenario: SimScenario, host: str = "127.0.0.1", base_port: int = 0):
        self.scenario = scenario
        self.host = host
        self._states: dict[str, SimPlugState] = {
            spec.plug_id: SimPlugState(spec, scenario.seed) for spec in scenario.plugs
        }
        self._servers: list[ThreadingHTTPServer] = []
        self._threads: list[threading.Thread] = []
        self._ports: dict[str, int] = {}
        self._started_mono: Optional[float] = None
        for i, spec in enumerate(scenario.plugs):
            port = 0 if base_port == 0 else base_port + i
            server = ThreadingHTTPServer((host, port), _make_handler(self, self._states[spec.plug_id]))
            server.daemon_threads = True
            self._servers.append(server)
            self._ports[spec.plug_id] = server.server_address[1]

    def now_s(self) -> float:
        if self._started_mono is None:
            return 0.0
        return time.monotonic() - self._started_mono

    def start(self) -> "SimulatorService":
        self._started_mono = time.monotonic()
        for server in self._servers:
            thread = threading.Thread(target=server.serve_forever, daemon=True)
            thread.start()
            self._threads.append(thread)
        return self

    def stop(self) -> None:
        for server in self._servers:
            server.shutdown()
            server.server_close()
        for thread in self._threads:
            thread.join(timeout=5)
        self._threads.clear()

    def address(self, plug_id: str) -> str:
        return f"{self.host}:{self._ports[plug_id]}"

    @property
    def addresses(self) -> dict[str, str]:
        return {plug_id: self.address(plug_id) for plug_id in self._ports}

    def plug_state(self, plug_id: str) -> SimPlugState:
        return self._states[plug_id]

    def set_dropout(self, plug_id: str, p: float) -> None:
        self._states[plug_id].set_dropout(p)

    def __enter__(self) -> "SimulatorService":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
