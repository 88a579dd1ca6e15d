import json
import re
from pathlib import Path

import pytest

from plugmeter.cli import main
from plugmeter.model import BaselineStats
from plugmeter.reporting import SessionSelection, stats_payload
from plugmeter.storage import read_samples, write_baseline

from test_reporting import seed_session


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExitCodes:
    def test_no_args_is_usage_error(self, workdir, capsys):
        code, _, err = run(capsys, )
        assert code == 2

    def test_unknown_command(self, workdir, capsys):
        code, _, _ = run(capsys, "frobnicate")
        assert code == 2

    def test_missing_required_option(self, workdir, capsys):
        code, _, _ = run(capsys, "log")
        assert code == 2

    def test_version(self, workdir, capsys):
        code, out, _ = run(capsys, "--version")
        assert code == 0
        assert "plugmeter" in out

    def test_broken_config_is_exit_2(self, workdir, capsys):
        Path("plugmeter.toml").write_text('[[plugs]]\nid = "x"\n')  # driver/address missing
        code, _, err = run(capsys, "plugs", "list")
        assert code == 2
        assert "config error" in err


class TestPlugsCommands:
    def test_add_then_list(self, workdir, capsys):
        code, out, _ = run(
            capsys, "plugs", "add", "bench-1",
            "--driver", "shelly-gen2", "--address", "192.168.1.50",
            "--interval", "2000", "--label", "GPU rig",
        )
        assert code == 0
        assert Path("plugmeter.toml").exists()

        code, out, _ = run(capsys, "plugs", "list")
        assert code == 0
        assert "bench-1" in out
        assert "shelly-gen2" in out
        assert "GPU rig" in out

    def test_duplicate_add_fails(self, workdir, capsys):
        args = ["plugs", "add", "dup", "--driver", "simulated", "--address", "h:1"]
        assert run(capsys, *args)[0] == 0
        # a clashing id is a configuration problem, same exit class as a bad file
        code, _, err = run(capsys, *args)
        assert code == 2

    def test_list_without_plugs(self, workdir, capsys):
        code, out, _ = run(capsys, "plugs", "list")
        assert code == 0
        assert "no plugs" in out.lower()

    def test_plugs_test_against_simulator(self, workdir, capsys, one_plug_sim):
        service, plug = one_plug_sim
        run(capsys, "plugs", "add", "p1", "--driver", "simulated",
            "--address", service.address("p1"))
        code, out, _ = run(capsys, "plugs", "test")
        assert code == 0
        assert "p1" in out and "W" in out

    def test_plugs_test_failure_exits_1(self, workdir, capsys):
        run(capsys, "plugs", "add", "dead", "--driver", "simulated", "--address", "127.0.0.1:1")
        code, out, err = run(capsys, "plugs", "test")
        assert code == 1
        assert "FAILED" in err or "FAILED" in out


class TestLogCommand:
    def test_bounded_run_writes_samples(self, workdir, capsys, one_plug_sim):
        service, plug = one_plug_sim
        run(capsys, "plugs", "add", "p1", "--driver", "simulated",
            "--address", service.address("p1"))
        code, out, _ = run(
            capsys, "log", "--plug", "p1", "--duration", "0.5", "--interval", "100",
        )
        assert code == 0
        files = list(Path("logs/standalone/p1").glob("*.jsonl"))
        assert files
        assert len(read_samples(files[0])) == 6

    def test_experiment_run_creates_session(self, workdir, capsys, one_plug_sim):
        service, plug = one_plug_sim
        run(capsys, "plugs", "add", "p1", "--driver", "simulated",
            "--address", service.address("p1"))
        code, out, _ = run(
            capsys, "log", "--plug", "p1", "--experiment", "train-a",
            "--duration", "0.5", "--interval", "100", "--notes", "first",
        )
        assert code == 0
        samples = list(Path("logs/experiments/train-a").rglob("*.samples.jsonl"))
        assert len(samples) == 1
        assert len(read_samples(samples[0])) == 6

    def test_unknown_plug_is_config_error(self, workdir, capsys):
        code, _, err = run(capsys, "log", "--plug", "ghost", "--duration", "0.1")
        assert code == 2


class TestStatsCommand:
    def seed(self, capsys, one_plug_sim):
        service, plug = one_plug_sim
        run(capsys, "plugs", "add", "p1", "--driver", "simulated",
            "--address", service.address("p1"))
        run(capsys, "log", "--plug", "p1", "--experiment", "train-a",
            "--duration", "0.5", "--interval", "100")

    def test_table_output(self, workdir, capsys, one_plug_sim):
        self.seed(capsys, one_plug_sim)
        code, out, _ = run(capsys, "stats", "--experiment", "train-a")
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("experiment")
        assert set(lines[1]) <= {"-", " "}
        assert any(l.startswith("train-a") for l in lines)
        assert any(l.startswith("aggregate") for l in lines)

    def test_json_matches_library_exactly(self, workdir, capsys, one_plug_sim):
        self.seed(capsys, one_plug_sim)
        code, out, _ = run(capsys, "stats", "--experiment", "train-a", "--json")
        assert code == 0
        from_cli = json.loads(out)
        from_lib = stats_payload(Path("logs"), (SessionSelection("train-a"),))
        assert json.dumps(from_cli, sort_keys=True) == json.dumps(from_lib, sort_keys=True)

    def test_price_override_changes_cost_only(self, workdir, capsys, one_plug_sim):
        self.seed(capsys, one_plug_sim)
        _, out1, _ = run(capsys, "stats", "--experiment", "train-a", "--json")
        _, out2, _ = run(capsys, "stats", "--experiment", "train-a", "--json", "--price", "1.0")
        row1 = json.loads(out1)["experiments"][0]["row"]
        row2 = json.loads(out2)["experiments"][0]["row"]
        assert row1["energy_kwh"] == row2["energy_kwh"]
        assert row2["cost"] == pytest.approx(row2["energy_kwh"], rel=1e-12)

    def test_unknown_experiment_exits_1(self, workdir, capsys):
        code, _, err = run(capsys, "stats", "--experiment", "ghost")
        assert code == 1

    def test_baseline_mode_adds_net_column(self, workdir, capsys, one_plug_sim):
        self.seed(capsys, one_plug_sim)
        write_baseline(
            Path("logs"),
            BaselineStats(plug_id="p1", mean_w=12.2, half_spread_w=0.6,
                          sample_count=600, window_s=600.0),
        )
        code, out, _ = run(capsys, "stats", "--experiment", "train-a", "--baseline", "per-plug")
        assert code == 0
        assert "net kWh" in out.splitlines()[0]


class TestReportCommand:
    def test_writes_report_files(self, workdir, capsys, logs_root):
        seed_session(logs_root, "train-a", "s1")
        code, out, _ = run(
            capsys, "--logs", str(logs_root), "report",
            "--experiment", "train-a", "--out", "out", "--timestamp-ms", "1755300000000",
        )
        assert code == 0
        wrote = [Path(line.split(" ", 1)[1]) for line in out.splitlines() if line.startswith("wrote ")]
        assert len(wrote) == 2
        assert all(p.exists() for p in wrote)
        assert any(p.suffix == ".md" for p in wrote)

    def test_html_format_adds_third_file(self, workdir, capsys, logs_root):
        seed_session(logs_root, "train-a", "s1")
        code, out, _ = run(
            capsys, "--logs", str(logs_root), "report",
            "--experiment", "train-a", "--out", "out", "--format", "html",
            "--timestamp-ms", "1755300000000",
        )
        assert code == 0
        assert sum(1 for line in out.splitlines() if line.startswith("wrote ")) == 3

    def test_pinned_timestamp_reproduces_bytes(self, workdir, capsys, logs_root):
        seed_session(logs_root, "train-a", "s1")
        for out_dir in ("r1", "r2"):
            assert run(
                capsys, "--logs", str(logs_root), "report",
                "--experiment", "train-a", "--out", out_dir,
                "--timestamp-ms", "1755300000000",
            )[0] == 0
        doc1 = next(Path("r1").glob("*.md")).read_bytes()
        doc2 = next(Path("r2").glob("*.md")).read_bytes()
        assert doc1 == doc2


class TestBaselineCommand:
    def test_measures_and_stores(self, workdir, capsys, idle_plug_sim, monkeypatch):
        service, plug = idle_plug_sim
        run(capsys, "plugs", "add", "idle", "--driver", "simulated",
            "--address", service.address("idle"))
        # shrink the floors so the test finishes quickly; the full-length
        # behavior is covered by the analytics suite
        import plugmeter.analytics.energy as energy_mod

        monkeypatch.setattr(energy_mod, "BASELINE_MIN_SPAN_S", 0.5)
        monkeypatch.setattr(energy_mod, "BASELINE_MIN_SAMPLES", 5)
        code, out, _ = run(
            capsys, "baseline", "--plug", "idle", "--duration", "0.8", "--interval", "100",
        )
        assert code == 0
        assert re.search(r"12\.\d+ ± \d+\.\d+ W", out)
        stored = json.loads(Path("logs/baselines/idle.json").read_text())
        assert stored["plug_id"] == "idle"
        assert 12.0 < stored["mean_w"] < 12.4
