"""Command line front end.

Subcommands map onto the library layers: plug management edits the config
file, `log` and `baseline` drive a collector, `stats` and `report` are pure
reads over the log directory, `serve` hosts the HTTP API and `simulate` runs
virtual plugs for development. Exit codes: 0 on success, 1 when a requested
operation fails at runtime (device unreachable, unknown experiment), 2 for
usage or configuration errors.
"""

from __future__ import annotations

import json
import signal
import sys
import threading
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import click

from plugmeter import __version__
from plugmeter.config import (
    DEFAULT_CONFIG_PATH,
    AppConfig,
    ConfigError,
    load_or_default,
    save_config,
)
from plugmeter.model import PlugConfig, PlugmeterError, TariffSettings

# analytics, server and report modules import numpy/fastapi; loaded inside the
# commands that need them so `plugmeter plugs list` stays snappy


@click.group(name="plugmeter")
@click.version_option(__version__, prog_name="plugmeter")
@click.option(
    "--config",
    "config_path",
    default=DEFAULT_CONFIG_PATH,
    show_default=True,
    help="Path to the TOML config file.",
)
@click.option("--logs", "logs_root", default=None, help="Override the log directory.")
@click.option("--verbose", is_flag=True, help="Chattier progress output.")
@click.pass_context
def cli(ctx: click.Context, config_path: str, logs_root: Optional[str], verbose: bool) -> None:
    """Meter the wall-socket energy of compute experiments."""
    config = load_or_default(config_path)
    if logs_root:
        from dataclasses import replace

        config = replace(config, logs_root=logs_root)
    for warning in config.warnings:
        click.echo(f"warning: {warning}", err=True)
    ctx.obj = {
        "config": config,
        "config_path": config_path,
        "verbose": verbose,
    }


def _config(ctx: click.Context) -> AppConfig:
    return ctx.obj["config"]


def _logs_root(ctx: click.Context) -> Path:
    return Path(_config(ctx).logs_root)


def _tariff(config: AppConfig, price: Optional[float], carbon: Optional[float],
            currency: Optional[str]) -> TariffSettings:
    return TariffSettings(
        price_per_kwh=price if price is not None else config.tariff.price_per_kwh,
        carbon_g_per_kwh=carbon if carbon is not None else config.tariff.carbon_g_per_kwh,
        currency_label=currency if currency is not None else config.tariff.currency_label,
    )


# -- plugs --------------------------------------------------------------------


@cli.group()
def plugs() -> None:
    """Manage configured smart plugs."""


@plugs.command("add")
@click.argument("plug_id")
@click.option("--driver", "driver_kind", required=True, help="Driver kind, e.g. shelly-gen2.")
@click.option("--address", required=True, help="Device address, host[:port].")
@click.option("--interval", "interval_ms", type=int, default=1000, show_default=True,
              help="Poll interval in milliseconds.")
@click.option("--label", default="", help="Free-form display label.")
@click.pass_context
def plugs_add(ctx: click.Context, plug_id: str, driver_kind: str, address: str,
              interval_ms: int, label: str) -> None:
    """Add a plug to the config file."""
    plug = PlugConfig(plug_id, driver_kind, address, poll_interval_ms=interval_ms, label=label)
    config = _config(ctx).with_plug(plug)
    save_config(config, ctx.obj["config_path"])
    ctx.obj["config"] = config
    click.echo(f"added plug {plug_id} ({driver_kind} at {address}) to {ctx.obj['config_path']}")


@plugs.command("list")
@click.pass_context
def plugs_list(ctx: click.Context) -> None:
    """List configured plugs."""
    config = _config(ctx)
    if not config.plugs:
        click.echo("no plugs configured")
        return
    rows = [("id", "driver", "address", "interval", "label")]
    rows += [
        (p.plug_id, p.driver_kind, p.address, f"{p.poll_interval_ms} ms", p.label)
        for p in config.plugs
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    for row in rows:
        click.echo("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())


@plugs.command("test")
@click.argument("plug_id", required=False)
@click.pass_context
def plugs_test(ctx: click.Context, plug_id: Optional[str]) -> None:
    """Poll each configured plug once and report reachability."""
    from plugmeter.drivers import get_driver
    from plugmeter.drivers.base import DriverError

    config = _config(ctx)
    targets = [config.plug(plug_id)] if plug_id else list(config.plugs)
    if not targets:
        raise click.UsageError("no plugs configured; add one with `plugmeter plugs add`")
    failures = 0
    for plug in targets:
        driver = None
        try:
            driver = get_driver(plug, config.collector.driver_timeout_ms)
            info = driver.identify()
            reading = driver.poll()
            counter = (
                f", counter {reading.energy_counter_wh:.3f} Wh"
                if reading.energy_counter_wh is not None
                else ""
            )
            click.echo(
                f"{plug.plug_id}: ok, {info.model} fw {info.firmware}, "
                f"{reading.power_w:.2f} W{counter}"
            )
        except DriverError as exc:
            failures += 1
            click.echo(f"{plug.plug_id}: FAILED ({exc.kind}) {exc}", err=True)
        finally:
            if driver is not None and hasattr(driver, "close"):
                driver.close()
    if failures:
        raise PlugmeterError(f"{failures} of {len(targets)} plugs failed the test")


# -- logging and baselines -----------------------------------------------------


def _interruptible_run(plug, logs_root, duration_s, settings, interval_ms,
                       experiment_id, notes):
    """run_standalone wired to SIGINT: first Ctrl-C stops cleanly."""
    from plugmeter.collector import run_standalone

    stop = threading.Event()
    previous = signal.getsignal(signal.SIGINT)

    def on_sigint(signum, frame):
        click.echo("\nstopping...", err=True)
        stop.set()

    signal.signal(signal.SIGINT, on_sigint)
    try:
        return run_standalone(
            plug,
            logs_root,
            duration_s=duration_s,
            settings=settings,
            interval_override_ms=interval_ms,
            experiment_id=experiment_id,
            notes=notes,
            stop_event=stop,
        )
    finally:
        signal.signal(signal.SIGINT, previous)


@cli.command("log")
@click.option("--plug", "plug_id", required=True, help="Configured plug to poll.")
@click.option("--experiment", "experiment_id", default=None,
              help="Scope samples to this experiment; omitted means standalone logging.")
@click.option("--interval", "interval_ms", type=float, default=None,
              help="Override the plug's poll interval (ms).")
@click.option("--duration", "duration_s", type=float, default=None,
              help="Stop after this many seconds; omitted means run until Ctrl-C.")
@click.option("--notes", default="", help="Free-form note stored with the session.")
@click.pass_context
def log_cmd(ctx: click.Context, plug_id: str, experiment_id: Optional[str],
            interval_ms: Optional[float], duration_s: Optional[float], notes: str) -> None:
    """Poll one plug and append samples to the log directory."""
    config = _config(ctx)
    plug = config.plug(plug_id)
    scope = f"experiment {experiment_id}" if experiment_id else "standalone stream"
    click.echo(
        f"logging {plug_id} every {interval_ms or plug.poll_interval_ms:g} ms "
        f"to {scope} (Ctrl-C stops)"
    )
    session = _interruptible_run(
        plug, _logs_root(ctx), duration_s, config.collector, interval_ms,
        experiment_id, notes,
    )
    if session is not None:
        click.echo(
            f"session {session.session_id} closed: "
            f"{(session.end_ts - session.start_ts) / 1000:.1f} s, "
            f"{session.error_count} poll errors"
        )
    else:
        click.echo("standalone logging stopped")


@cli.command("baseline")
@click.option("--plug", "plug_id", required=True, help="Configured plug to measure.")
@click.option("--duration", "duration_s", type=float, default=600.0, show_default=True,
              help="Measurement window in seconds.")
@click.option("--interval", "interval_ms", type=float, default=None,
              help="Override the plug's poll interval (ms).")
@click.pass_context
def baseline_cmd(ctx: click.Context, plug_id: str, duration_s: float,
                 interval_ms: Optional[float]) -> None:
    """Measure idle power over a quiet window and store it for this plug.

    Keep the metered machine idle while this runs; the stored figure is
    later subtracted from experiment energy as the net-of-idle view.
    """
    from plugmeter.analytics import SeriesWindow, measure_baseline
    from plugmeter.storage import read_samples, standalone_samples_path, write_baseline

    config = _config(ctx)
    plug = config.plug(plug_id)
    logs_root = _logs_root(ctx)
    t0_ms = int(time.time() * 1000)
    click.echo(f"measuring idle power on {plug_id} for {duration_s:g} s...")
    _interruptible_run(plug, logs_root, duration_s, config.collector, interval_ms, None, "")
    day = datetime.now(tz=timezone.utc).strftime("%Y-%m-%d")
    samples = [
        s for s in read_samples(standalone_samples_path(logs_root, plug_id, day))
        if s.ts >= t0_ms
    ]
    window = SeriesWindow.from_samples(samples, plug_id=plug_id)
    stats = measure_baseline(window)
    write_baseline(logs_root, stats)
    click.echo(f"baseline for {plug_id}: {stats.format()} over {stats.sample_count} samples")


# -- analysis ------------------------------------------------------------------


@cli.command("stats")
@click.option("--experiment", "experiment_ids", multiple=True, required=True,
              help="Experiment to summarize; repeatable.")
@click.option("--price", type=float, default=None, help="Override price per kWh.")
@click.option("--carbon", type=float, default=None, help="Override grams CO2e per kWh.")
@click.option("--currency", default=None, help="Override the currency label.")
@click.option("--baseline", "baseline_mode", type=click.Choice(["none", "per-plug"]),
              default="none", show_default=True,
              help="Subtract stored idle baselines into a net energy column.")
@click.option("--json", "as_json", is_flag=True, help="Print the full-precision JSON instead.")
@click.pass_context
def stats_cmd(ctx: click.Context, experiment_ids: tuple[str, ...], price: Optional[float],
              carbon: Optional[float], currency: Optional[str], baseline_mode: str,
              as_json: bool) -> None:
    """Energy, cost and carbon statistics for logged experiments."""
    from plugmeter.reporting import (
        SessionSelection,
        fmt_currency,
        fmt_gaps,
        fmt_grams,
        fmt_kwh,
        fmt_seconds,
        fmt_watts,
        stats_payload,
    )

    config = _config(ctx)
    tariff = _tariff(config, price, carbon, currency)
    selections = tuple(SessionSelection(eid) for eid in experiment_ids)
    payload = stats_payload(_logs_root(ctx), selections, tariff, baseline_mode)
    if as_json:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
        return

    header = ["experiment", "sessions", "duration s", "samples", "mean W",
              "energy kWh", f"cost {tariff.currency_label}", "carbon g", "gaps"]
    if baseline_mode == "per-plug":
        header.append("net kWh")
    rows = [header]
    entries = payload["experiments"] + [
        {"experiment_id": "aggregate",
         "session_count": sum(e["session_count"] for e in payload["experiments"]),
         "row": payload["aggregate"]}
    ]
    for entry in entries:
        row = entry["row"]
        cells = [
            entry["experiment_id"],
            str(entry["session_count"]),
            fmt_seconds(row["duration_s"]),
            str(row["sample_count"]),
            fmt_watts(row["mean_power_w"]),
            fmt_kwh(row["energy_kwh"]),
            fmt_currency(row["cost"]),
            fmt_grams(row["carbon_g"]),
            fmt_gaps(row["gap_count"], row["gap_seconds"]),
        ]
        if baseline_mode == "per-plug":
            net = row.get("net_energy_kwh")
            cells.append(fmt_kwh(net) if net is not None else "-")
        rows.append(cells)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    for i, row in enumerate(rows):
        click.echo("  ".join(cell.rjust(w) if j else cell.ljust(w)
                             for j, (cell, w) in enumerate(zip(row, widths))).rstrip())
        if i == 0:
            click.echo("  ".join("-" * w for w in widths))


@cli.command("report")
@click.option("--experiment", "experiment_ids", multiple=True, required=True,
              help="Experiment to include; repeatable.")
@click.option("--out", "out_dir", default="./reports", show_default=True,
              help="Directory the report files are written to.")
@click.option("--format", "output_format", type=click.Choice(["markdown", "html"]),
              default="markdown", show_default=True)
@click.option("--baseline", "baseline_mode", type=click.Choice(["none", "per-plug"]),
              default="none", show_default=True)
@click.option("--price", type=float, default=None, help="Override price per kWh.")
@click.option("--carbon", type=float, default=None, help="Override grams CO2e per kWh.")
@click.option("--currency", default=None, help="Override the currency label.")
@click.option("--max-points", type=int, default=2000, show_default=True,
              help="Chart resolution (points per series).")
@click.option("--timestamp-ms", type=int, default=None,
              help="Pin the generation timestamp (ms since epoch) for reproducible output.")
@click.pass_context
def report_cmd(ctx: click.Context, experiment_ids: tuple[str, ...], out_dir: str,
               output_format: str, baseline_mode: str, price: Optional[float],
               carbon: Optional[float], currency: Optional[str], max_points: int,
               timestamp_ms: Optional[int]) -> None:
    """Generate a shareable report over logged experiments."""
    from plugmeter.reporting import (
        ChartOptions,
        ReportRequest,
        SessionSelection,
        generate_report,
    )

    config = _config(ctx)
    request = ReportRequest(
        selections=tuple(SessionSelection(eid) for eid in experiment_ids),
        tariff=_tariff(config, price, carbon, currency),
        baseline_mode=baseline_mode,
        charts=ChartOptions(max_points=max_points),
        output_format=output_format,
    )
    generated = generate_report(request, _logs_root(ctx), out_dir, generated_at_ms=timestamp_ms)
    click.echo(f"wrote {generated.document_path}")
    if generated.html_path:
        click.echo(f"wrote {generated.html_path}")
    click.echo(f"wrote {generated.sidecar_path}")


# -- services ------------------------------------------------------------------


@cli.command("serve")
@click.option("--bind", "bind_scope", type=click.Choice(["host", "lan", "all"]), default=None,
              help="Override the configured bind scope.")
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--static", "static_dir", default=None,
              help="Serve this directory as the dashboard root.")
@click.option("--with-collector", is_flag=True,
              help="Also poll all configured plugs while serving.")
@click.pass_context
def serve_cmd(ctx: click.Context, bind_scope: Optional[str], port: Optional[int],
              static_dir: Optional[str], with_collector: bool) -> None:
    """Host the monitoring HTTP API (and dashboard, when built)."""
    from dataclasses import replace

    from plugmeter.server import serve

    config = _config(ctx)
    server_settings = config.server
    if bind_scope is not None:
        server_settings = replace(server_settings, bind_scope=bind_scope)
    if port is not None:
        server_settings = replace(server_settings, port=port)
    if static_dir is not None:
        server_settings = replace(server_settings, static_dir=static_dir)
    config = replace(config, server=server_settings)

    collector = None
    if with_collector:
        from plugmeter.collector import Collector

        if not config.plugs:
            raise click.UsageError("--with-collector needs at least one configured plug")
        collector = Collector(_logs_root(ctx), config.plugs, config.collector)
        collector.start()
        click.echo(f"collector polling {len(config.plugs)} plug(s)")
    click.echo(
        f"serving on http://{server_settings.bind_host}:{server_settings.port} "
        f"(scope {server_settings.bind_scope})"
    )
    try:
        serve(config, collector)
    finally:
        if collector is not None:
            collector.stop()


@cli.command("simulate")
@click.option("--scenario", "scenario_path", required=True,
              help="JSON scenario file describing the virtual plugs.")
@click.option("--base-port", type=int, default=0, show_default=True,
              help="First port to bind; 0 picks free ports.")
@click.pass_context
def simulate_cmd(ctx: click.Context, scenario_path: str, base_port: int) -> None:
    """Run virtual smart plugs for development and demos."""
    from plugmeter.drivers.simulator import SimulatorService, load_scenario

    scenario = load_scenario(scenario_path)
    service = SimulatorService(scenario, base_port=base_port)
    service.start()
    stop = threading.Event()
    previous = signal.getsignal(signal.SIGINT)
    signal.signal(signal.SIGINT, lambda s, f: stop.set())
    try:
        for plug_id, address in sorted(service.addresses.items()):
            click.echo(f"{plug_id}: {address}")
        click.echo("simulator running, Ctrl-C stops")
        while not stop.is_set():
            stop.wait(0.2)
    finally:
        signal.signal(signal.SIGINT, previous)
        service.stop()
        click.echo("simulator stopped")


def main(argv: Optional[list[str]] = None) -> int:
    """Console entry point with the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except ConfigError as exc:
        for line in exc.errors:
            click.echo(f"config error: {line}", err=True)
        return 2
    except PlugmeterError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
