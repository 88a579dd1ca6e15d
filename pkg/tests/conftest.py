import socket
import time
from pathlib import Path

import pytest

from plugmeter.drivers.simulator import SimPlugSpec, SimScenario, SimulatorService
from plugmeter.drivers.waveforms import Constant, Sine
from plugmeter.model import PlugConfig

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def logs_root(tmp_path):
    root = tmp_path / "logs"
    root.mkdir()
    return root


@pytest.fixture
def sim_factory():
    """Start SimulatorService instances that are torn down after the test."""
    services = []

    def start(*specs: SimPlugSpec, seed: int = 0) -> SimulatorService:
        service = SimulatorService(SimScenario(plugs=tuple(specs), seed=seed))
        service.start()
        services.append(service)
        return service

    yield start
    for service in services:
        service.stop()


@pytest.fixture
def one_plug_sim(sim_factory):
    """A single sine plug plus its PlugConfig, the common collector setup."""
    service = sim_factory(SimPlugSpec("p1", Sine(80.0, 20.0, 1.0)), seed=11)
    plug = PlugConfig("p1", "simulated", service.address("p1"), poll_interval_ms=1000)
    return service, plug


@pytest.fixture
def idle_plug_sim(sim_factory):
    service = sim_factory(SimPlugSpec("idle", Constant(12.2)), seed=4)
    plug = PlugConfig("idle", "simulated", service.address("idle"), poll_interval_ms=1000)
    return service, plug


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def wait_until(predicate, timeout=5.0, step=0.02):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(step)
    return predicate()
