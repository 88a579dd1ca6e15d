import json
import urllib.request

import pytest

from plugmeter.drivers.shelly import parse_switch_status
from plugmeter.drivers.simulator import (
    SimPlugSpec,
    SimPlugState,
    SimScenario,
    SimulatorService,
    load_scenario,
    parse_scenario,
)
from plugmeter.drivers.waveforms import Constant, ScenarioError, Sine


def http_json(url, timeout=2.0):
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.status, json.loads(resp.read())


class TestPlugState:
    def test_deterministic_across_instances(self):
        spec = SimPlugSpec(plug_id="a", waveform=Sine(80.0, 20.0, 60.0), noise_sigma_w=2.0)
        s1 = SimPlugState(spec, seed=7)
        s2 = SimPlugState(spec, seed=7)
        seq1 = [s1.reading_at(t * 0.5) for t in range(20)]
        seq2 = [s2.reading_at(t * 0.5) for t in range(20)]
        assert seq1 == seq2

    def test_seed_changes_noise(self):
        spec = SimPlugSpec(plug_id="a", waveform=Constant(50.0), noise_sigma_w=2.0)
        a = SimPlugState(spec, seed=1).reading_at(0.0)
        b = SimPlugState(spec, seed=2).reading_at(0.0)
        assert a != b

    def test_counter_tracks_exact_integral(self):
        """The emulated counter is closed-form, never touched by noise."""
        wf = Sine(80.0, 20.0, 60.0)
        spec = SimPlugSpec(plug_id="a", waveform=wf, noise_sigma_w=5.0)
        state = SimPlugState(spec, seed=3)
        for t in (0.0, 13.7, 61.2, 3600.0):
            _, counter = state.reading_at(t)
            expected = wf.integral_ws(0.0, t) / 3600.0
            assert counter == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_counterless(self):
        state = SimPlugState(SimPlugSpec(plug_id="a", waveform=Constant(5.0), counter=False), seed=0)
        assert state.reading_at(10.0)[1] is None

    def test_noise_never_goes_negative(self):
        spec = SimPlugSpec(plug_id="a", waveform=Constant(0.5), noise_sigma_w=10.0)
        state = SimPlugState(spec, seed=9)
        assert all(state.reading_at(float(t))[0] >= 0.0 for t in range(500))

    def test_dropout_toggle(self):
        spec = SimPlugSpec(plug_id="a", waveform=Constant(5.0))
        state = SimPlugState(spec, seed=0)
        assert not any(state.should_drop() for _ in range(50))
        state.set_dropout(1.0)
        assert all(state.should_drop() for _ in range(50))
        state.set_dropout(0.0)
        assert not any(state.should_drop() for _ in range(50))


class TestScenarioParsing:
    def test_round_trip(self):
        scenario = SimScenario(
            plugs=(
                SimPlugSpec(plug_id="a", waveform=Sine(80.0, 20.0, 60.0), noise_sigma_w=1.0),
                SimPlugSpec(plug_id="b", waveform=Constant(12.2), counter=False),
            ),
            seed=42,
        )
        assert parse_scenario(scenario.to_dict()) == scenario

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps({
            "seed": 5,
            "plugs": [{"plug_id": "x", "waveform": {"kind": "constant", "watts": 9.0}}],
        }))
        scenario = load_scenario(path)
        assert scenario.seed == 5
        assert scenario.plugs[0].plug_id == "x"

    @pytest.mark.parametrize(
        "obj",
        [
            "nope",
            {"plugs": "nope"},
            {"plugs": [{"waveform": {"kind": "constant", "watts": 1}}]},  # no plug_id
            {"plugs": [], "seed": "five"},
        ],
    )
    def test_bad_scenarios(self, obj):
        with pytest.raises(ScenarioError):
            parse_scenario(obj)

    def test_duplicate_plug_ids(self):
        with pytest.raises(ScenarioError):
            parse_scenario({
                "plugs": [
                    {"plug_id": "a", "waveform": {"kind": "constant", "watts": 1}},
                    {"plug_id": "a", "waveform": {"kind": "constant", "watts": 2}},
                ]
            })


class TestHttpEndpoints:
    def test_shelly_status_shape_parses_with_real_parser(self, one_plug_sim):
        status, body = http_json(f"http://{one_plug_sim[0].address('p1')}/rpc/Switch.GetStatus?id=0")
        assert status == 200
        power, counter = parse_switch_status(body)
        assert 60.0 <= power <= 100.0 + 5 * 3  # sine range plus noise headroom
        assert counter is not None

    def test_device_info_shape(self, one_plug_sim):
        status, body = http_json(f"http://{one_plug_sim[0].address('p1')}/rpc/Shelly.GetDeviceInfo")
        assert status == 200
        assert body["gen"] == 2
        assert body["model"]

    def test_plain_status_shape(self, one_plug_sim):
        status, body = http_json(f"http://{one_plug_sim[0].address('p1')}/sim/status")
        assert status == 200
        assert body["plug_id"] == "p1"
        assert body["power_w"] >= 0
        assert "energy_wh" in body

    def test_plain_info_shape(self, one_plug_sim):
        status, body = http_json(f"http://{one_plug_sim[0].address('p1')}/sim/info")
        assert status == 200
        assert body["has_energy_counter"] is True

    def test_unknown_path_404(self, one_plug_sim):
        import urllib.error

        with pytest.raises(urllib.error.HTTPError) as ei:
            http_json(f"http://{one_plug_sim[0].address('p1')}/nope")
        assert ei.value.code == 404

    def test_dropout_endpoint(self, sim_factory):
        import urllib.error

        sim = sim_factory(SimPlugSpec(plug_id="d", waveform=Constant(5.0)), seed=0)
        addr = sim.address("d")
        http_json(f"http://{addr}/sim/status")  # reachable before

        req = urllib.request.Request(
            f"http://{addr}/sim/dropout",
            data=json.dumps({"p": 1.0}).encode(),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        with urllib.request.urlopen(req, timeout=2.0) as resp:
            assert resp.status == 200

        with pytest.raises((urllib.error.URLError, ConnectionError, OSError)):
            http_json(f"http://{addr}/sim/status", timeout=1.0)

        sim.set_dropout("d", 0.0)
        status, _ = http_json(f"http://{addr}/sim/status")
        assert status == 200

    def test_each_plug_gets_its_own_listener(self, sim_factory):
        sim = sim_factory(
            SimPlugSpec(plug_id="a", waveform=Constant(1.0)),
            SimPlugSpec(plug_id="b", waveform=Constant(2.0)),
            seed=0,
        )
        addr_a, addr_b = sim.address("a"), sim.address("b")
        assert addr_a != addr_b
        _, body_a = http_json(f"http://{addr_a}/sim/status")
        _, body_b = http_json(f"http://{addr_b}/sim/status")
        assert body_a["plug_id"] == "a"
        assert body_b["plug_id"] == "b"
        assert body_a["power_w"] == pytest.approx(1.0)
        assert body_b["power_w"] == pytest.approx(2.0)

    def test_shared_timebase(self, sim_factory):
        """All plugs of one service report the same waveform clock."""
        sim = sim_factory(
            SimPlugSpec(plug_id="a", waveform=Constant(1.0)),
            SimPlugSpec(plug_id="b", waveform=Constant(2.0)),
            seed=0,
        )
        _, body_a = http_json(f"http://{sim.address('a')}/sim/status")
        _, body_b = http_json(f"http://{sim.address('b')}/sim/status")
        assert abs(body_a["sim_t_s"] - body_b["sim_t_s"]) < 0.5
