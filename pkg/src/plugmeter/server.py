"""Monitoring HTTP API and static dashboard host.

Read endpoints (catalog, series, stats, events) work directly off the log
directory, so the server can run detached from any collector and stay
consistent with what the CLI computes from the same files. GET handlers
never write. Control endpoints (session start/stop) require an attached
collector and answer 503 without one.

Live power is served over Server-Sent Events by tailing the plug's active
sample file: complete lines only, event ids carry the sample sequence number,
and a client reconnecting with Last-Event-ID is replayed anything it missed
from the same stream. A comment line goes out as heartbeat when nothing else
has been sent for a while so proxies keep the connection alive.

Binding is scope-based: the default scope listens on the loopback interface
only, so requests addressed to a LAN address never reach the server unless
the operator chose the wider scope explicitly.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import re
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse

from plugmeter import __version__
from plugmeter.analytics import SeriesWindow, active_backend, series_payload
from plugmeter.collector import Collector, SessionActiveError, CollectorError
from plugmeter.config import AppConfig, ConfigError
from plugmeter.model import PowerSample, TariffSettings
from plugmeter.reporting import (
    BaselineMissingError,
    ChartOptions,
    ReportError,
    ReportRequest,
    SessionSelection,
    UnknownSelectionError,
    canonical_json,
    generate_report,
    stats_payload,
)
from plugmeter.storage import (
    StorageError,
    find_session,
    list_experiments,
    read_events,
    read_samples,
    session_samples_path,
    standalone_samples_path,
)

DEFAULT_SERIES_POINTS = 2000
LIVE_POLL_S = 0.25
HEARTBEAT_S = 15.0

_REPORT_NAME = re.compile(r"report-\d{8}T\d{6}Z\.(md|html|summary\.json)")


def _bad_request(detail: str) -> JSONResponse:
    return JSONResponse({"detail": detail}, status_code=400)


def _parse_int(raw: Optional[str], name: str) -> Optional[int]:
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}") from None


def _parse_float(raw: Optional[str], name: str) -> Optional[float]:
    if raw is None or raw == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{name} must be a number, got {raw!r}") from None
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError(f"{name} must be finite, got {raw!r}")
    return value


def _selection_from_obj(obj: Any) -> SessionSelection:
    if isinstance(obj, str):
        return SessionSelection(obj)
    if isinstance(obj, dict):
        return SessionSelection(
            experiment_id=str(obj.get("experiment_id", "")),
            mode=obj.get("mode", "all"),
            session_ids=tuple(obj.get("session_ids", ()) or ()),
        )
    raise ReportError(f"cannot read experiment selection from {obj!r}")


def create_app(
    config: AppConfig,
    collector: Optional[Collector] = None,
    *,
    heartbeat_s: float = HEARTBEAT_S,
    live_poll_s: float = LIVE_POLL_S,
) -> FastAPI:
    """Wire the API around one config (and optionally a running collector)."""
    logs_root = Path(config.logs_root)
    app = FastAPI(title="plugmeter", version=__version__, docs_url=None, redoc_url=None)

    if config.server.bind_scope in ("lan", "all"):
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    known_plugs = {p.plug_id for p in config.plugs}
    if collector is not None:
        known_plugs |= set(collector.status().keys())

    # -- read side -----------------------------------------------------------

    @app.get("/api/health")
    def health() -> dict[str, Any]:
        body: dict[str, Any] = {
            "status": "ok",
            "version": __version__,
            "kernel_backend": active_backend(),
            "collector_attached": collector is not None,
        }
        return body

    @app.get("/api/experiments")
    def experiments(request: Request) -> Response:
        catalog = [e.to_dict() for e in list_experiments(logs_root)]
        body = canonical_json({"experiments": catalog})
        etag = '"' + hashlib.sha256(body.encode("utf-8")).hexdigest() + '"'
        if request.headers.get("if-none-match") == etag:
            return Response(status_code=304, headers={"ETag": etag})
        return Response(body, media_type="application/json", headers={"ETag": etag})

    @app.get("/api/experiments/{experiment_id}/sessions/{session_id}/series")
    def series(
        experiment_id: str,
        session_id: str,
        request: Request,
    ) -> Response:
        q = request.query_params
        try:
            t_from = _parse_int(q.get("from"), "from")
            t_to = _parse_int(q.get("to"), "to")
            max_points = _parse_int(q.get("max_points"), "max_points")
        except ValueError as exc:
            return _bad_request(str(exc))
        if max_points is None:
            max_points = DEFAULT_SERIES_POINTS
        if max_points < 2:
            return _bad_request(f"max_points must be >= 2, got {max_points}")
        if t_from is not None and t_to is not None and t_from > t_to:
            return _bad_request(f"empty window: from {t_from} > to {t_to}")

        info = find_session(logs_root, experiment_id, session_id)
        if info is None:
            return JSONResponse(
                {"detail": f"unknown session: {experiment_id}/{session_id}"},
                status_code=404,
            )
        path = session_samples_path(logs_root, experiment_id, session_id)
        try:
            samples = read_samples(path)
        except StorageError:
            samples = []
        t0 = info.start_ts
        t1 = info.end_ts
        if t1 is None:
            t1 = samples[-1].ts if samples else t0
        if samples:
            t0 = min(t0, samples[0].ts)
            t1 = max(t1, samples[-1].ts)
        window = SeriesWindow.from_samples(samples, t0_ms=t0, t1_ms=t1, plug_id=info.plug_id)
        if t_from is not None or t_to is not None:
            window = window.sliced(
                t_from if t_from is not None else window.t0_ms,
                t_to if t_to is not None else window.t1_ms,
            )
        payload = series_payload(window, max_points)
        payload["experiment_id"] = experiment_id
        payload["session_id"] = session_id
        return JSONResponse(payload)

    @app.get("/api/stats")
    def stats(request: Request) -> Response:
        q = request.query_params
        raw_ids = q.get("experiments", "")
        ids = [part for part in raw_ids.split(",") if part.strip()]
        if not ids:
            return _bad_request("experiments is required, e.g. ?experiments=run-a,run-b")
        try:
            price = _parse_float(q.get("price"), "price")
            carbon = _parse_float(q.get("carbon"), "carbon")
        except ValueError as exc:
            return _bad_request(str(exc))
        baseline_mode = q.get("baseline", "none")
        tariff = TariffSettings(
            price_per_kwh=price if price is not None else config.tariff.price_per_kwh,
            carbon_g_per_kwh=carbon if carbon is not None else config.tariff.carbon_g_per_kwh,
            currency_label=q.get("currency", config.tariff.currency_label),
        )
        selections = tuple(SessionSelection(eid.strip()) for eid in ids)
        try:
            payload = stats_payload(logs_root, selections, tariff, baseline_mode)
        except BaselineMissingError as exc:
            return JSONResponse(
                {
                    "detail": str(exc),
                    "hint": f"record an idle baseline for plug {exc.plug_id} first, "
                    "or ask for baseline=none",
                },
                status_code=409,
            )
        except UnknownSelectionError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=404)
        except ReportError as exc:
            return _bad_request(str(exc))
        return JSONResponse(payload)

    @app.get("/api/events")
    def events(request: Request) -> dict[str, Any]:
        try:
            limit = _parse_int(request.query_params.get("limit"), "limit")
        except ValueError:
            limit = None
        return {"events": read_events(logs_root, limit=limit or 100)}

    # -- live stream ---------------------------------------------------------

    # without a collector the running-session lookup scans the log tree, so
    # cache it briefly instead of rescanning every poll tick
    scan_cache: dict[str, tuple[float, Optional[Path]]] = {}

    def _running_session_file(plug_id: str) -> Optional[Path]:
        now = time.monotonic()
        cached = scan_cache.get(plug_id)
        if cached is not None and now < cached[0]:
            return cached[1]
        running = [
            s
            for e in list_experiments(logs_root)
            for s in e.sessions
            if s.plug_id == plug_id and s.running
        ]
        path = None
        if running:
            latest = max(running, key=lambda s: (s.start_ts, s.session_id))
            path = session_samples_path(logs_root, latest.experiment_id, latest.session_id)
        scan_cache[plug_id] = (now + 1.0, path)
        return path

    def _live_file(plug_id: str) -> Path:
        """Where the plug's next sample will land right now."""
        if collector is not None:
            session = collector.active_session(plug_id)
            if session is not None:
                return session_samples_path(logs_root, session.experiment_id, session.session_id)
        else:
            path = _running_session_file(plug_id)
            if path is not None:
                return path
        day = datetime.now(tz=timezone.utc).strftime("%Y-%m-%d")
        return standalone_samples_path(logs_root, plug_id, day)

    def _last_line_offset(path: Path) -> int:
        """Offset of the last complete line, so a fresh live client starts at
        the current reading instead of replaying the whole day's backlog."""
        try:
            size = path.stat().st_size
        except FileNotFoundError:
            return 0
        if size == 0:
            return 0
        with path.open("rb") as fh:
            back = min(size, 65536)
            fh.seek(size - back)
            chunk = fh.read(back)
        end = chunk.rfind(b"\n")
        if end < 0:
            return 0 if back == size else size - back
        start = chunk.rfind(b"\n", 0, end)
        return size - back + start + 1

    def _read_new_lines(path: Path, offset: int) -> tuple[list[str], int]:
        """Complete lines appended past offset; a torn tail stays unread."""
        try:
            with path.open("rb") as fh:
                fh.seek(offset)
                chunk = fh.read()
        except FileNotFoundError:
            return [], offset
        if not chunk:
            return [], offset
        end = chunk.rfind(b"\n")
        if end < 0:
            return [], offset
        complete = chunk[: end + 1]
        lines = [ln for ln in complete.decode("utf-8", "replace").split("\n") if ln.strip()]
        return lines, offset + end + 1

    @app.get("/api/live/{plug_id}")
    async def live(plug_id: str, request: Request) -> Response:
        if plug_id not in known_plugs:
            return JSONResponse({"detail": f"unknown plug: {plug_id}"}, status_code=404)
        resume_raw = request.headers.get("last-event-id")
        resume_seq: Optional[int] = None
        if resume_raw is not None:
            try:
                resume_seq = int(resume_raw)
            except ValueError:
                resume_seq = None

        async def stream():
            current: Optional[Path] = None
            offset = 0
            skip_up_to = resume_seq
            last_sent = time.monotonic()
            yield ": connected\n\n"
            while True:
                if await request.is_disconnected():
                    return
                target = _live_file(plug_id)
                if target != current:
                    if current is None and skip_up_to is None:
                        # fresh client: current reading now, backlog never
                        offset = _last_line_offset(target)
                    else:
                        # resuming clients replay what they missed; a stream
                        # switch (session started) restarts ids, so the old
                        # resume filter no longer applies
                        if current is not None:
                            skip_up_to = None
                        offset = 0
                    current = target
                lines, offset = _read_new_lines(current, offset)
                for line in lines:
                    try:
                        sample = PowerSample.from_line(line)
                    except Exception:
                        continue
                    if skip_up_to is not None and sample.seq <= skip_up_to:
                        continue
                    yield f"id: {sample.seq}\nevent: sample\ndata: {sample.to_line()}\n\n"
                    last_sent = time.monotonic()
                if time.monotonic() - last_sent >= heartbeat_s:
                    yield ": hb\n\n"
                    last_sent = time.monotonic()
                await asyncio.sleep(live_poll_s)

        return StreamingResponse(
            stream(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    # -- control side --------------------------------------------------------

    @app.post("/api/sessions")
    async def sessions(request: Request) -> Response:
        if collector is None:
            return JSONResponse(
                {"detail": "no collector attached; start the server with one to control sessions"},
                status_code=503,
            )
        try:
            body = await request.json()
        except Exception:
            return _bad_request("request body must be JSON")
        if not isinstance(body, dict):
            return _bad_request("request body must be a JSON object")
        action = body.get("action")
        plug_id = body.get("plug_id")
        if action not in ("start", "stop"):
            return _bad_request(f"action must be start or stop, got {action!r}")
        if not isinstance(plug_id, str) or not plug_id:
            return _bad_request("plug_id is required")
        try:
            if action == "start":
                experiment_id = body.get("experiment_id")
                if not isinstance(experiment_id, str) or not experiment_id:
                    return _bad_request("experiment_id is required to start a session")
                session = collector.start_session(
                    experiment_id, plug_id, notes=str(body.get("notes", ""))
                )
                return JSONResponse({"session": session.to_dict()}, status_code=201)
            session = collector.stop_session(plug_id)
            return JSONResponse({"session": session.to_dict()})
        except SessionActiveError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=409)
        except CollectorError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=404)

    @app.post("/api/reports")
    async def reports(request: Request) -> Response:
        try:
            body = await request.json()
        except Exception:
            return _bad_request("request body must be JSON")
        if not isinstance(body, dict):
            return _bad_request("request body must be a JSON object")
        if not isinstance(body.get("experiments", []), list):
            return _bad_request("experiments must be a list")
        try:
            selections = tuple(
                _selection_from_obj(obj) for obj in body.get("experiments", [])
            )
            tariff_raw = body.get("tariff") or {}
            tariff = TariffSettings(
                price_per_kwh=float(tariff_raw.get("price_per_kwh", config.tariff.price_per_kwh)),
                carbon_g_per_kwh=float(
                    tariff_raw.get("carbon_g_per_kwh", config.tariff.carbon_g_per_kwh)
                ),
                currency_label=str(tariff_raw.get("currency", config.tariff.currency_label)),
            )
            req = ReportRequest(
                selections=selections,
                tariff=tariff,
                baseline_mode=body.get("baseline_mode", "none"),
                charts=ChartOptions(max_points=int(body.get("max_points", 2000))),
                output_format=body.get("output_format", "markdown"),
            )
            generated = generate_report(req, logs_root, logs_root / "reports")
        except BaselineMissingError as exc:
            return JSONResponse(
                {"detail": str(exc), "hint": f"record an idle baseline for plug {exc.plug_id} first"},
                status_code=409,
            )
        except UnknownSelectionError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=404)
        except (ReportError, ValueError, TypeError) as exc:
            return _bad_request(str(exc))
        return JSONResponse(
            {
                "document": str(generated.document_path),
                "sidecar": str(generated.sidecar_path),
                "html": str(generated.html_path) if generated.html_path else None,
                "document_url": f"/api/reports/{generated.document_path.name}",
                "sidecar_url": f"/api/reports/{generated.sidecar_path.name}",
                "html_url": (
                    f"/api/reports/{generated.html_path.name}" if generated.html_path else None
                ),
                "summary": generated.sidecar,
            },
            status_code=201,
        )

    # report files live under the log root, outside the static mount, so the
    # dashboard needs a route to fetch what POST /api/reports just wrote
    _REPORT_TYPES = {".md": "text/markdown", ".html": "text/html", ".json": "application/json"}

    @app.get("/api/reports/{name}")
    def report_file(name: str) -> Response:
        # names are generator-shaped only; anything else (traversal attempts
        # included) is a plain 404
        if not _REPORT_NAME.fullmatch(name):
            return JSONResponse({"detail": f"unknown report: {name}"}, status_code=404)
        path = logs_root / "reports" / name
        if not path.is_file():
            return JSONResponse({"detail": f"unknown report: {name}"}, status_code=404)
        media = _REPORT_TYPES[Path(name).suffix]
        return Response(path.read_bytes(), media_type=media)

    # -- static dashboard (mounted last so /api keeps priority) ---------------

    static_dir = config.server.static_dir
    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="dashboard")
    else:

        @app.get("/")
        def index() -> dict[str, Any]:
            return {
                "service": "plugmeter",
                "version": __version__,
                "endpoints": [
                    "/api/health",
                    "/api/experiments",
                    "/api/experiments/{experiment_id}/sessions/{session_id}/series",
                    "/api/stats?experiments=...",
                    "/api/events",
                    "/api/live/{plug_id}",
                    "POST /api/sessions",
                    "POST /api/reports",
                ],
            }

    return app


def serve(config: AppConfig, collector: Optional[Collector] = None) -> None:
    """Run the API under uvicorn until interrupted."""
    import uvicorn

    app = create_app(config, collector)
    host = config.server.bind_host
    if config.server.bind_scope != "host":
        print(
            f"warning: binding {host} exposes the API beyond this machine "
            f"(scope {config.server.bind_scope})",
            file=sys.stderr,
        )
    uvicorn.run(app, host=host, port=config.server.port, log_level="warning")
