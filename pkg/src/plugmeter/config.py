"""Configuration loading, validation, and persistence.

The config file is TOML (default ``./plugmeter.toml``) holding registered
plugs, server settings, tariff defaults, and collector tuning. Validation is
total: any parsed document yields either a validated config or the complete
list of violations, never a crash and never just the first error.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from plugmeter.model import (
    MAX_POLL_INTERVAL_MS,
    MIN_POLL_INTERVAL_MS,
    BUILTIN_DRIVER_KINDS,
    EXTENSION_PREFIX,
    PlugConfig,
    PlugmeterError,
    TariffSettings,
    is_token,
)

DEFAULT_CONFIG_PATH = "./plugmeter.toml"
DEFAULT_LOGS_ROOT = "./logs"
DEFAULT_PORT = 8808

BIND_SCOPES = ("host", "lan", "all")


class ConfigError(PlugmeterError):
    """Validation failed; carries every violation found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ServerSettings:
    """Monitoring server bind scope and port.

    host -> loopback only; lan/all -> all interfaces (lan additionally warns
    at startup when the machine holds a publicly routable address).
    """

    bind_scope: str = "host"
    port: int = DEFAULT_PORT
    logs_root: str = DEFAULT_LOGS_ROOT
    static_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.bind_scope not in BIND_SCOPES:
            raise ValueError(f"bind_scope must be one of {BIND_SCOPES}, got {self.bind_scope!r}")
        if not (1 <= int(self.port) <= 65535):
            raise ValueError(f"port out of range: {self.port}")

    @property
    def bind_host(self) -> str:
        return "127.0.0.1" if self.bind_scope == "host" else "0.0.0.0"


@dataclass(frozen=True)
class CollectorSettings:
    """Tuning knobs for the polling engine."""

    gap_factor: float = 5.0
    offline_after: int = 10
    driver_timeout_ms: int = 2000
    flush_interval_s: float = 1.0


@dataclass(frozen=True)
class AppConfig:
    """The fully validated configuration document."""

    logs_root: str = DEFAULT_LOGS_ROOT
    plugs: tuple[PlugConfig, ...] = ()
    server: ServerSettings = field(default_factory=ServerSettings)
    tariff: TariffSettings = field(default_factory=TariffSettings)
    collector: CollectorSettings = field(default_factory=CollectorSettings)
    warnings: tuple[str, ...] = ()

    def plug(self, plug_id: str) -> PlugConfig:
        for plug in self.plugs:
            if plug.plug_id == plug_id:
                return plug
        raise ConfigError([f"unknown plug: {plug_id}"])

    def with_plug(self, plug: PlugConfig) -> "AppConfig":
        if any(p.plug_id == plug.plug_id for p in self.plugs):
            raise ConfigError([f"duplicate plug_id: {plug.plug_id}"])
        return replace(self, plugs=self.plugs + (plug,))


def _want(obj: Mapping[str, Any], key: str, kinds: tuple[type, ...], errors: list[str],
          where: str, default: Any = None) -> Any:
    value = obj.get(key, default)
    if value is default and default is not None:
        return default
    if value is None:
        return default
    if isinstance(value, bool) and bool not in kinds:
        errors.append(f"{where}.{key}: expected {kinds[0].__name__}, got bool")
        return default
    if not isinstance(value, kinds):
        errors.append(f"{where}.{key}: expected {'/'.join(k.__name__ for k in kinds)}, got {type(value).__name__}")
        return default
    return value


def validate_config(raw: Any) -> AppConfig:
    """Normalize a parsed config document or raise ConfigError with all violations."""
    errors: list[str] = []
    warnings: list[str] = []

    if not isinstance(raw, Mapping):
        raise ConfigError(["config root must be a table/object"])

    logs_root = _want(raw, "logs_root", (str,), errors, "config", DEFAULT_LOGS_ROOT)

    plugs: list[PlugConfig] = []
    seen_ids: set[str] = set()
    raw_plugs = raw.get("plugs", [])
    if not isinstance(raw_plugs, (list, tuple)):
        errors.append("plugs: expected an array of tables")
        raw_plugs = []
    for i, entry in enumerate(raw_plugs):
        where = f"plugs[{i}]"
        if not isinstance(entry, Mapping):
            errors.append(f"{where}: expected a table")
            continue
        # check every field of every plug so one bad value does not hide others
        entry_ok = True
        plug_id = entry.get("id")
        if not is_token(plug_id):
            errors.append(f"{where}.id: must be 1-64 chars of [a-z0-9-], got {plug_id!r}")
            entry_ok = False
        elif plug_id in seen_ids:
            errors.append(f"duplicate plug_id: {plug_id}")
            entry_ok = False
        else:
            seen_ids.add(plug_id)

        driver = entry.get("driver", "")
        if driver not in BUILTIN_DRIVER_KINDS:
            if isinstance(driver, str) and driver.startswith(EXTENSION_PREFIX) and len(driver) > len(EXTENSION_PREFIX):
                warnings.append(
                    f"{where}: extension driver {driver!r} accepted; polling requires a registered implementation"
                )
            else:
                errors.append(
                    f"{where}.driver: unknown driver_kind {driver!r} "
                    f"(expected one of {list(BUILTIN_DRIVER_KINDS)} or '{EXTENSION_PREFIX}<name>')"
                )
                entry_ok = False

        address = _want(entry, "address", (str,), errors, where, "")
        if not address:
            errors.append(f"{where}.address: required")
            entry_ok = False

        interval = entry.get("interval_ms", 1000)
        if isinstance(interval, bool) or not isinstance(interval, int):
            errors.append(f"{where}.interval_ms: expected integer milliseconds, got {interval!r}")
            entry_ok = False
        elif interval < MIN_POLL_INTERVAL_MS:
            errors.append(
                f"{where}.interval_ms: {interval} ms is below the {MIN_POLL_INTERVAL_MS} ms floor"
            )
            entry_ok = False
        elif interval > MAX_POLL_INTERVAL_MS:
            errors.append(
                f"{where}.interval_ms: {interval} ms exceeds the {MAX_POLL_INTERVAL_MS} ms ceiling"
            )
            entry_ok = False

        label = _want(entry, "label", (str,), errors, where, "")
        if not entry_ok:
            continue
        try:
            plugs.append(PlugConfig(plug_id, driver, address, interval, label))
        except ValueError as exc:
            errors.append(f"{where}: {exc}")

    server_raw = raw.get("server", {})
    server = ServerSettings(logs_root=logs_root)
    if not isinstance(server_raw, Mapping):
        errors.append("server: expected a table")
    else:
        scope = _want(server_raw, "bind", (str,), errors, "server", "host")
        port = _want(server_raw, "port", (int,), errors, "server", DEFAULT_PORT)
        static_dir = _want(server_raw, "static_dir", (str,), errors, "server", None)
        if scope not in BIND_SCOPES:
            errors.append(f"server.bind: must be one of {list(BIND_SCOPES)}, got {scope!r}")
        if port is not None and not (1 <= port <= 65535):
            errors.append(f"server.port: out of range: {port}")
        if scope in BIND_SCOPES and port is not None and 1 <= port <= 65535:
            server = ServerSettings(scope, port, logs_root, static_dir or None)

    tariff_raw = raw.get("tariff", {})
    tariff = TariffSettings()
    if not isinstance(tariff_raw, Mapping):
        errors.append("tariff: expected a table")
    else:
        price = _want(tariff_raw, "price_per_kwh", (int, float), errors, "tariff", 0.30)
        carbon = _want(tariff_raw, "carbon_g_per_kwh", (int, float), errors, "tariff", 400.0)
        currency = _want(tariff_raw, "currency", (str,), errors, "tariff", "EUR")
        for name, rate in (("price_per_kwh", price), ("carbon_g_per_kwh", carbon)):
            if rate is not None and (not math.isfinite(float(rate)) or float(rate) < 0):
                errors.append(f"tariff.{name}: must be finite and >= 0, got {rate!r}")
                break
        else:
            tariff = TariffSettings(float(price), float(carbon), currency)

    coll_raw = raw.get("collector", {})
    collector = CollectorSettings()
    if not isinstance(coll_raw, Mapping):
        errors.append("collector: expected a table")
    else:
        gap_factor = _want(coll_raw, "gap_factor", (int, float), errors, "collector", 5.0)
        offline_after = _want(coll_raw, "offline_after", (int,), errors, "collector", 10)
        timeout = _want(coll_raw, "driver_timeout_ms", (int,), errors, "collector", 2000)
        flush = _want(coll_raw, "flush_interval_s", (int, float), errors, "collector", 1.0)
        if gap_factor is not None and float(gap_factor) < 1:
            errors.append(f"collector.gap_factor: must be >= 1, got {gap_factor}")
        elif offline_after is not None and offline_after < 1:
            errors.append(f"collector.offline_after: must be >= 1, got {offline_after}")
        elif timeout is not None and timeout < 1:
            errors.append(f"collector.driver_timeout_ms: must be >= 1, got {timeout}")
        else:
            collector = CollectorSettings(float(gap_factor), offline_after, timeout, float(flush))

    if errors:
        raise ConfigError(errors)

    return AppConfig(
        logs_root=logs_root,
        plugs=tuple(plugs),
        server=server,
        tariff=tariff,
        collector=collector,
        warnings=tuple(warnings),
    )


def load_config(path: str | Path) -> AppConfig:
    """Read and validate a TOML config file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"config file is not valid TOML: {exc}"]) from None
    return validate_config(raw)


def load_or_default(path: str | Path) -> AppConfig:
    """Like load_config, but a missing file yields an empty default config."""
    if not Path(path).exists():
        return AppConfig()
    return load_config(path)


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    raise TypeError(f"cannot emit {type(value).__name__} as TOML")


def dump_config(config: AppConfig) -> str:
    """Emit the config as TOML text (narrow schema; round-trips load_config)."""
    lines: list[str] = [f"logs_root = {_toml_value(config.logs_root)}", ""]
    for plug in config.plugs:
        lines.append("[[plugs]]")
        lines.append(f"id = {_toml_value(plug.plug_id)}")
        lines.append(f"driver = {_toml_value(plug.driver_kind)}")
        lines.append(f"address = {_toml_value(plug.address)}")
        lines.append(f"interval_ms = {_toml_value(plug.poll_interval_ms)}")
        if plug.label:
            lines.append(f"label = {_toml_value(plug.label)}")
        lines.append("")
    lines.append("[server]")
    lines.append(f"bind = {_toml_value(config.server.bind_scope)}")
    lines.append(f"port = {_toml_value(config.server.port)}")
    if config.server.static_dir:
        lines.append(f"static_dir = {_toml_value(config.server.static_dir)}")
    lines.append("")
    lines.append("[tariff]")
    lines.append(f"price_per_kwh = {_toml_value(config.tariff.price_per_kwh)}")
    lines.append(f"carbon_g_per_kwh = {_toml_value(config.tariff.carbon_g_per_kwh)}")
    lines.append(f"currency = {_toml_value(config.tariff.currency_label)}")
    lines.append("")
    lines.append("[collector]")
    lines.append(f"gap_factor = {_toml_value(config.collector.gap_factor)}")
    lines.append(f"offline_after = {_toml_value(config.collector.offline_after)}")
    lines.append(f"driver_timeout_ms = {_toml_value(config.collector.driver_timeout_ms)}")
    lines.append(f"flush_interval_s = {_toml_value(config.collector.flush_interval_s)}")
    lines.append("")
    return "\n".join(lines)


def save_config(config: AppConfig, path: str | Path) -> None:
    """Write the config atomically (write-temp-then-rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(dump_config(config), encoding="utf-8")
    tmp.replace(path)
