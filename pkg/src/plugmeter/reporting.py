"""Standardized, deterministic energy-consumption reports.

A report renders the same statistics tables and charts the monitoring UI
shows, as a portable markdown document (plus an optional HTML rendering of
the identical content) and a machine-readable JSON sidecar mirroring every
table cell at full precision. Given identical logs and a pinned generation
timestamp the output is byte-identical: traversal order is fixed, floats are
formatted by rule, charts are vector polylines built from the same
downsampled series the HTTP API serves, and the footer hashes the exact log
byte ranges that went in, so a reviewer can verify a published report
against published logs.

Display rounding: kWh at 3 fractional digits, currency at 2, grams at 1.
The sidecar always carries the unrounded values.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Sequence

from plugmeter import __version__
from plugmeter.analytics import (
    SeriesWindow,
    aggregate_summaries,
    series_payload,
    summarize,
)
from plugmeter.model import (
    BaselineStats,
    EnergySummary,
    PlugmeterError,
    TariffSettings,
)
from plugmeter.storage import (
    ExperimentInfo,
    SessionInfo,
    StorageError,
    list_experiments,
    read_baseline,
    read_samples_with_hash,
    session_samples_path,
)

SELECTION_MODES = ("all", "latest", "explicit")
BASELINE_MODES = ("none", "per-plug")
OUTPUT_FORMATS = ("markdown", "html")


class ReportError(PlugmeterError):
    pass


class UnknownSelectionError(ReportError):
    """An experiment or session id in the request does not exist."""


class BaselineMissingError(ReportError):
    """Per-plug baseline handling was requested but a plug has none stored."""

    def __init__(self, plug_id: str) -> None:
        super().__init__(f"baseline requested but none stored for plug {plug_id}")
        self.plug_id = plug_id


@dataclass(frozen=True)
class SessionSelection:
    experiment_id: str
    mode: str = "all"
    session_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.mode not in SELECTION_MODES:
            raise ReportError(f"unknown session filter mode: {self.mode!r}")
        if self.mode == "explicit" and not self.session_ids:
            raise ReportError(f"explicit selection for {self.experiment_id} names no sessions")


@dataclass(frozen=True)
class ChartOptions:
    max_points: int = 2000
    include_power_chart: bool = True
    include_cumulative_chart: bool = True

    def __post_init__(self) -> None:
        if self.max_points < 2:
            raise ReportError(f"max_points must be >= 2, got {self.max_points}")


@dataclass(frozen=True)
class ReportRequest:
    selections: tuple[SessionSelection, ...]
    tariff: TariffSettings = field(default_factory=TariffSettings)
    baseline_mode: str = "none"
    charts: ChartOptions = field(default_factory=ChartOptions)
    output_format: str = "markdown"

    def __post_init__(self) -> None:
        if not self.selections:
            raise ReportError("a report needs at least one experiment selected")
        if self.baseline_mode not in BASELINE_MODES:
            raise ReportError(f"unknown baseline mode: {self.baseline_mode!r}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ReportError(f"unknown output format: {self.output_format!r}")


@dataclass(frozen=True)
class GeneratedReport:
    document_path: Path
    sidecar_path: Path
    html_path: Optional[Path]
    sidecar: dict[str, Any]


@dataclass
class _SessionData:
    info: SessionInfo
    summary: EnergySummary
    window: SeriesWindow
    input_path: str
    input_bytes: int
    input_sha256: str
    payload: Optional[dict] = None
    payload_hash: Optional[str] = None


# -- formatting rules (shared with the CLI stats table) ----------------------


def fmt_kwh(value: float) -> str:
    return f"{value:.3f}"


def fmt_currency(value: float) -> str:
    return f"{value:.2f}"


def fmt_grams(value: float) -> str:
    return f"{value:.1f}"


def fmt_watts(value: float) -> str:
    return f"{value:.2f}"


def fmt_seconds(value: float) -> str:
    return f"{value:.1f}"


def fmt_gaps(count: int, seconds: float) -> str:
    return f"{count} / {fmt_seconds(seconds)} s"


def _utc_iso(ts_ms: int) -> str:
    return datetime.fromtimestamp(ts_ms / 1000, tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def _utc_compact(ts_ms: int) -> str:
    return datetime.fromtimestamp(ts_ms / 1000, tz=timezone.utc).strftime(
        "%Y%m%dT%H%M%SZ"
    )


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def payload_hash(payload: dict) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


# -- selection and data loading ----------------------------------------------


def _pick_sessions(info: ExperimentInfo, selection: SessionSelection) -> list[SessionInfo]:
    sessions = sorted(info.sessions, key=lambda s: (s.start_ts, s.session_id))
    if selection.mode == "all":
        picked = sessions
    elif selection.mode == "latest":
        picked = [max(sessions, key=lambda s: (s.start_ts, s.session_id))] if sessions else []
    else:
        by_id = {s.session_id: s for s in sessions}
        missing = [sid for sid in selection.session_ids if sid not in by_id]
        if missing:
            raise UnknownSelectionError(
                f"unknown sessions for experiment {selection.experiment_id}: {', '.join(missing)}"
            )
        picked = [by_id[sid] for sid in selection.session_ids]
    if not picked:
        raise UnknownSelectionError(
            f"selection for experiment {selection.experiment_id} matches no sessions"
        )
    return picked


def _load_session(
    logs_root: Path,
    info: SessionInfo,
    tariff: TariffSettings,
    baseline: Optional[BaselineStats],
) -> _SessionData:
    path = session_samples_path(logs_root, info.experiment_id, info.session_id)
    try:
        samples, consumed, digest = read_samples_with_hash(path)
    except StorageError:
        samples, consumed, digest = [], 0, hashlib.sha256(b"").hexdigest()
    t0 = info.start_ts
    t1 = info.end_ts
    if t1 is None:
        t1 = samples[-1].ts if samples else t0
    if samples:
        t0 = min(t0, samples[0].ts)
        t1 = max(t1, samples[-1].ts)
    window = SeriesWindow.from_samples(samples, t0_ms=t0, t1_ms=t1, plug_id=info.plug_id)
    summary = summarize(window, tariff, baseline, experiment_id=info.experiment_id)
    rel_path = path.relative_to(logs_root).as_posix()
    return _SessionData(info, summary, window, rel_path, consumed, digest)


def _resolve_selections(
    logs_root: Path,
    selections: Sequence[SessionSelection],
    tariff: TariffSettings,
    baseline_mode: str,
) -> list[tuple[SessionSelection, list[_SessionData]]]:
    """Load and summarize every selected session; atomic, so any unknown id
    fails the whole request before partial results exist."""
    catalog = {e.experiment_id: e for e in list_experiments(logs_root)}
    resolved: list[tuple[SessionSelection, list[_SessionData]]] = []
    for selection in selections:
        info = catalog.get(selection.experiment_id)
        if info is None:
            raise UnknownSelectionError(f"unknown experiment: {selection.experiment_id}")
        picked = _pick_sessions(info, selection)
        loaded: list[_SessionData] = []
        for session_info in picked:
            baseline = None
            if baseline_mode == "per-plug":
                baseline = read_baseline(logs_root, session_info.plug_id)
                if baseline is None:
                    raise BaselineMissingError(session_info.plug_id)
            loaded.append(_load_session(logs_root, session_info, tariff, baseline))
        resolved.append((selection, loaded))
    return resolved


def _experiment_rows(
    experiments: list[tuple[SessionSelection, list[_SessionData]]],
) -> tuple[list[tuple[str, int, EnergySummary]], EnergySummary]:
    rows: list[tuple[str, int, EnergySummary]] = []
    for selection, loaded in experiments:
        summaries = [d.summary for d in loaded]
        row = summaries[0] if len(summaries) == 1 else aggregate_summaries(
            summaries, experiment_id=selection.experiment_id
        )
        rows.append((selection.experiment_id, len(loaded), row))
    aggregate = rows[0][2] if len(rows) == 1 else aggregate_summaries([r[2] for r in rows])
    return rows, aggregate


def stats_payload(
    logs_root: str | Path,
    selections: Sequence[SessionSelection],
    tariff: Optional[TariffSettings] = None,
    baseline_mode: str = "none",
) -> dict[str, Any]:
    """Statistics for the selected experiments as plain dicts.

    This is the single computation path behind the stats HTTP endpoint, the
    CLI stats table and the report tables, so their numbers agree exactly.
    """
    if baseline_mode not in BASELINE_MODES:
        raise ReportError(f"unknown baseline mode: {baseline_mode!r}")
    if tariff is None:
        tariff = TariffSettings()
    experiments = _resolve_selections(Path(logs_root), selections, tariff, baseline_mode)
    rows, aggregate = _experiment_rows(experiments)
    return {
        "tariff": tariff.to_dict(),
        "baseline_mode": baseline_mode,
        "experiments": [
            {
                "experiment_id": eid,
                "session_count": n,
                "row": row.to_dict(),
                "sessions": [
                    {
                        "session_id": d.info.session_id,
                        "plug_id": d.info.plug_id,
                        "running": d.info.running,
                        "orphaned": d.info.orphaned,
                        "summary": d.summary.to_dict(),
                    }
                    for d in loaded
                ],
            }
            for (selection, loaded), (eid, n, row) in zip(experiments, rows)
        ],
        "aggregate": aggregate.to_dict(),
    }


# -- chart rendering ----------------------------------------------------------

_CHART_W = 640
_CHART_H = 220
_PAD_L, _PAD_R, _PAD_T, _PAD_B = 56, 12, 12, 30


def _scale(values: Sequence[float], lo: float, hi: float, out_lo: float, out_hi: float) -> list[float]:
    span = hi - lo
    if span <= 0:
        mid = (out_lo + out_hi) / 2
        return [mid for _ in values]
    k = (out_hi - out_lo) / span
    return [out_lo + (v - lo) * k for v in values]


def _polyline_svg(
    ts_ms: Sequence[int],
    ys: Sequence[float],
    y_label: str,
    title: str,
    stroke: str,
) -> str:
    if not ts_ms:
        return ""
    t_lo, t_hi = float(ts_ms[0]), float(ts_ms[-1])
    y_lo, y_hi = min(ys), max(ys)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    xs = _scale([float(t) for t in ts_ms], t_lo, t_hi, _PAD_L, _CHART_W - _PAD_R)
    ys_px = _scale(ys, y_lo, y_hi, _CHART_H - _PAD_B, _PAD_T)
    points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys_px))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_CHART_W}" height="{_CHART_H}" '
        f'viewBox="0 0 {_CHART_W} {_CHART_H}" role="img">',
        f"<title>{title}</title>",
        f'<rect x="{_PAD_L}" y="{_PAD_T}" width="{_CHART_W - _PAD_L - _PAD_R}" '
        f'height="{_CHART_H - _PAD_T - _PAD_B}" fill="none" stroke="#999" stroke-width="1"/>',
        f'<polyline fill="none" stroke="{stroke}" stroke-width="1.5" points="{points}"/>',
        f'<text x="{_PAD_L - 6}" y="{_PAD_T + 10}" text-anchor="end" font-size="10" '
        f'font-family="monospace">{_axis_num(y_hi)}</text>',
        f'<text x="{_PAD_L - 6}" y="{_CHART_H - _PAD_B}" text-anchor="end" font-size="10" '
        f'font-family="monospace">{_axis_num(y_lo)}</text>',
        f'<text x="{_PAD_L}" y="{_CHART_H - 8}" text-anchor="start" font-size="10" '
        f'font-family="monospace">{_utc_iso(int(ts_ms[0]))}</text>',
        f'<text x="{_CHART_W - _PAD_R}" y="{_CHART_H - 8}" text-anchor="end" font-size="10" '
        f'font-family="monospace">{_utc_iso(int(ts_ms[-1]))}</text>',
        f'<text x="14" y="{_PAD_T + 10}" font-size="10" font-family="monospace" '
        f'transform="rotate(90 14 {_PAD_T + 10})">{y_label}</text>',
        "</svg>",
    ]
    return "".join(parts)


def _axis_num(value: float) -> str:
    return f"{value:.3f}".rstrip("0").rstrip(".") or "0"


def _session_charts(data: _SessionData, options: ChartOptions) -> list[tuple[str, str]]:
    """(caption, svg) pairs for one session, from the shared series payload."""
    if data.payload is None or data.window.sample_count < 2:
        return []
    charts = []
    label = f"{data.info.experiment_id}/{data.info.session_id}"
    if options.include_power_chart:
        charts.append(
            (
                f"Power draw, {label}",
                _polyline_svg(
                    data.payload["power"]["ts_ms"],
                    data.payload["power"]["w"],
                    "W",
                    f"Power draw over time for {label}",
                    "#0b6e4f",
                ),
            )
        )
    if options.include_cumulative_chart:
        charts.append(
            (
                f"Cumulative energy, {label}",
                _polyline_svg(
                    data.payload["cumulative"]["ts_ms"],
                    data.payload["cumulative"]["kwh"],
                    "kWh",
                    f"Cumulative energy over time for {label}",
                    "#1455b4",
                ),
            )
        )
    return charts


# -- document assembly --------------------------------------------------------

_STATS_HEADER = [
    "experiment",
    "sessions",
    "duration s",
    "samples",
    "mean W",
    "energy kWh",
    "cost",
    "carbon g",
    "gaps",
]


def _stats_cells(label: str, sessions: int, s: EnergySummary) -> list[str]:
    return [
        label,
        str(sessions),
        fmt_seconds(s.duration_s),
        str(s.sample_count),
        fmt_watts(s.mean_power_w),
        fmt_kwh(s.energy_kwh),
        fmt_currency(s.cost),
        fmt_grams(s.carbon_g),
        fmt_gaps(s.gap_count, s.gap_seconds),
    ]


def _md_table(header: list[str], rows: list[list[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return lines


def _html_escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _html_table(header: list[str], rows: list[list[str]]) -> list[str]:
    lines = ["<table>", "<thead><tr>"]
    lines += [f"<th>{_html_escape(h)}</th>" for h in header]
    lines += ["</tr></thead>", "<tbody>"]
    for row in rows:
        lines.append("<tr>" + "".join(f"<td>{_html_escape(c)}</td>" for c in row) + "</tr>")
    lines += ["</tbody>", "</table>"]
    return lines


def generate_report(
    request: ReportRequest,
    logs_root: str | Path,
    out_dir: str | Path,
    generated_at_ms: Optional[int] = None,
) -> GeneratedReport:
    """Build the report and sidecar files; returns their paths and the sidecar.

    generated_at_ms pins the generation timestamp (and the output file names),
    which makes the output byte-identical for identical inputs.
    """
    logs_root = Path(logs_root)
    out_dir = Path(out_dir)
    if generated_at_ms is None:
        generated_at_ms = int(datetime.now(tz=timezone.utc).timestamp() * 1000)

    experiments = _resolve_selections(
        logs_root, request.selections, request.tariff, request.baseline_mode
    )
    for _, loaded in experiments:
        for data in loaded:
            if data.window.sample_count >= 2:
                data.payload = series_payload(data.window, request.charts.max_points)
                data.payload_hash = payload_hash(data.payload)
    experiment_rows, aggregate = _experiment_rows(experiments)

    # -- assemble the markdown document
    baseline_note = (
        "none (gross energy shown)"
        if request.baseline_mode == "none"
        else "per-plug stored baselines subtracted into net energy"
    )
    md: list[str] = [
        "# Energy Consumption Report",
        "",
        f"- Tool: plugmeter {__version__}",
        f"- Generated: {_utc_iso(generated_at_ms)}",
        f"- Tariff: {request.tariff.price_per_kwh} {request.tariff.currency_label}/kWh, "
        f"{request.tariff.carbon_g_per_kwh} gCO2e/kWh",
        f"- Baseline handling: {baseline_note}",
        "",
        "## Statistics",
        "",
    ]
    table_rows = [_stats_cells(eid, n, s) for eid, n, s in experiment_rows]
    table_rows.append(_stats_cells("aggregate", sum(n for _, n, _ in experiment_rows), aggregate))
    md += _md_table(_STATS_HEADER, table_rows)

    per_session_rows: list[list[str]] = []
    for selection, loaded in experiments:
        for d in loaded:
            label = f"{d.info.experiment_id}/{d.info.session_id}"
            per_session_rows.append(_stats_cells(label, 1, d.summary))
    if len(per_session_rows) > len(experiment_rows):
        md += ["", "### Sessions", ""]
        md += _md_table(_STATS_HEADER, per_session_rows)

    chart_blocks: list[tuple[str, str]] = []
    if request.charts.include_power_chart or request.charts.include_cumulative_chart:
        for selection, loaded in experiments:
            for d in loaded:
                chart_blocks += _session_charts(d, request.charts)
    if chart_blocks:
        md += ["", "## Charts", ""]
        for caption, svg in chart_blocks:
            md += [f"**{caption}**", "", svg, ""]

    md += ["", "## Inputs", ""]
    input_rows = []
    all_data = [d for _, loaded in experiments for d in loaded]
    for d in all_data:
        input_rows.append([d.input_path, str(d.input_bytes), d.input_sha256])
    md += _md_table(["file", "bytes", "sha256"], input_rows)
    combined = hashlib.sha256(
        "".join(d.input_sha256 for d in all_data).encode("ascii")
    ).hexdigest()
    md += ["", f"Combined input hash: `{combined}`", ""]
    md_text = "\n".join(md)

    # -- sidecar mirrors every cell at full precision
    sidecar: dict[str, Any] = {
        "tool_version": __version__,
        "generated_at_ms": generated_at_ms,
        "generated_at": _utc_iso(generated_at_ms),
        "tariff": request.tariff.to_dict(),
        "baseline_mode": request.baseline_mode,
        "chart_options": {
            "max_points": request.charts.max_points,
            "include_power_chart": request.charts.include_power_chart,
            "include_cumulative_chart": request.charts.include_cumulative_chart,
        },
        "experiments": [
            {
                "experiment_id": selection.experiment_id,
                "row": row.to_dict(),
                "session_count": n,
                "sessions": [
                    {
                        "session_id": d.info.session_id,
                        "plug_id": d.info.plug_id,
                        "running": d.info.running,
                        "orphaned": d.info.orphaned,
                        "summary": d.summary.to_dict(),
                        "series_hash": d.payload_hash,
                        "input": {
                            "path": d.input_path,
                            "bytes": d.input_bytes,
                            "sha256": d.input_sha256,
                        },
                    }
                    for d in loaded
                ],
            }
            for (selection, loaded), (eid, n, row) in zip(experiments, experiment_rows)
        ],
        "aggregate": aggregate.to_dict(),
        "combined_input_hash": combined,
    }
    sidecar_text = json.dumps(sidecar, indent=2, sort_keys=True, allow_nan=False) + "\n"

    stamp = _utc_compact(generated_at_ms)
    out_dir.mkdir(parents=True, exist_ok=True)
    document_path = out_dir / f"report-{stamp}.md"
    sidecar_path = out_dir / f"report-{stamp}.summary.json"
    document_path.write_text(md_text, encoding="utf-8", newline="\n")
    sidecar_path.write_text(sidecar_text, encoding="utf-8", newline="\n")

    html_path: Optional[Path] = None
    if request.output_format == "html":
        html: list[str] = [
            "<!DOCTYPE html>",
            '<html lang="en"><head><meta charset="utf-8">',
            "<title>Energy Consumption Report</title>",
            "<style>body{font-family:sans-serif;max-width:60rem;margin:2rem auto;padding:0 1rem}"
            "table{border-collapse:collapse}td,th{border:1px solid #bbb;padding:4px 8px;"
            "text-align:right}td:first-child,th:first-child{text-align:left}</style>",
            "</head><body>",
            "<h1>Energy Consumption Report</h1>",
            "<ul>",
            f"<li>Tool: plugmeter {__version__}</li>",
            f"<li>Generated: {_utc_iso(generated_at_ms)}</li>",
            f"<li>Tariff: {request.tariff.price_per_kwh} "
            f"{_html_escape(request.tariff.currency_label)}/kWh, "
            f"{request.tariff.carbon_g_per_kwh} gCO2e/kWh</li>",
            f"<li>Baseline handling: {_html_escape(baseline_note)}</li>",
            "</ul>",
            "<h2>Statistics</h2>",
        ]
        html += _html_table(_STATS_HEADER, table_rows)
        if len(per_session_rows) > len(experiment_rows):
            html += ["<h3>Sessions</h3>"]
            html += _html_table(_STATS_HEADER, per_session_rows)
        if chart_blocks:
            html += ["<h2>Charts</h2>"]
            for caption, svg in chart_blocks:
                html += [f"<p><strong>{_html_escape(caption)}</strong></p>", svg]
        html += ["<h2>Inputs</h2>"]
        html += _html_table(["file", "bytes", "sha256"], input_rows)
        html += [f"<p>Combined input hash: <code>{combined}</code></p>", "</body></html>"]
        html_path = out_dir / f"report-{stamp}.html"
        html_path.write_text("\n".join(html), encoding="utf-8", newline="\n")

    return GeneratedReport(document_path, sidecar_path, html_path, sidecar)
