"""The measurement engine: schedules polls, attributes samples, detects gaps.

Scheduling is fixed-rate: slot k's deadline is start + k * interval, so a
slow poll delays only itself and integration intervals stay near-uniform.
Slots that are already more than one interval in the past are skipped, never
bursted.

Gap flags are decided at write time in an append-only file, which forces a
one-sample hold buffer per stream: a sample is written once its successor
arrives (flagging it gap-after when the pair spans more than gap_factor *
interval), or as soon as that threshold has elapsed without a successor,
because at that point the flag is certain whatever comes next. The buffer is
bounded: nothing is held longer than one gap threshold.

Session start/stop and sample ingestion are serialized per plug, so
attribution flips happen between samples, never mid-sample.
"""

from __future__ import annotations

import logging
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from plugmeter.config import CollectorSettings
from plugmeter.drivers import DriverError, get_driver
from plugmeter.model import ExperimentSession, PlugConfig, PlugmeterError, PowerSample
from plugmeter.storage import (
    SampleStream,
    StandaloneWriter,
    StorageError,
    append_event,
    session_meta_path,
    session_samples_path,
    write_session_meta,
)

log = logging.getLogger(__name__)

_STANDALONE = "standalone"


class CollectorError(PlugmeterError):
    pass


class SessionActiveError(CollectorError):
    """A session is already running on this plug; nesting is rejected."""


class Notifier:
    """Delivers collector events to events.log plus any extra sinks.

    Delivery must never take down measurement: each sink failure is retried
    once and then swallowed.
    """

    def __init__(self, logs_root: str | Path, extra_sinks: Sequence[Callable[[dict], None]] = ()):
        self.logs_root = Path(logs_root)
        self._extra_sinks = list(extra_sinks)

    def notify(
        self, severity: str, kind: str, detail: str, plug_id: Optional[str] = None
    ) -> dict[str, Any]:
        event: dict[str, Any] = {
            "ts": int(time.time() * 1000),
            "severity": severity,
            "kind": kind,
        }
        if plug_id is not None:
            event["plug_id"] = plug_id
        event["detail"] = detail
        sinks: list[Callable[[dict], None]] = [self._log_sink] + self._extra_sinks
        for sink in sinks:
            for attempt in (1, 2):
                try:
                    sink(event)
                    break
                except Exception:
                    if attempt == 2:
                        log.exception("notification sink failed twice, dropping event")
        return event

    def _log_sink(self, event: dict[str, Any]) -> None:
        append_event(
            self.logs_root,
            event["severity"],
            event["kind"],
            event["detail"],
            plug_id=event.get("plug_id"),
            ts=event["ts"],
        )


@dataclass
class _Pending:
    """One sampled reading held back until its gap flag is decidable."""

    ts: int
    power_w: float
    counter_wh: Optional[float]
    stream_key: str


@dataclass
class _PlugState:
    plug: PlugConfig
    standalone: StandaloneWriter
    interval_ms: float
    lock: threading.Lock = field(default_factory=threading.Lock)
    session: Optional[ExperimentSession] = None
    session_stream: Optional[SampleStream] = None
    last_closed: Optional[ExperimentSession] = None
    pendings: dict[str, _Pending] = field(default_factory=dict)
    consecutive_errors: int = 0
    session_errors: int = 0
    session_first_ts: Optional[int] = None
    session_last_ts: Optional[int] = None
    samples_ok: int = 0
    last_sample: Optional[PowerSample] = None
    halted: bool = False


class _PollerThread(threading.Thread):
    def __init__(
        self,
        collector: "Collector",
        state: _PlugState,
        start_at_mono: Optional[float],
        slots: Optional[int],
    ):
        super().__init__(name=f"poll-{state.plug.plug_id}", daemon=True)
        self._collector = collector
        self._state = state
        self._interval_s = state.interval_ms / 1000.0
        self._start_mono = start_at_mono
        self._slots = slots
        self._stop_evt = threading.Event()
        self._driver = None

    def request_stop(self) -> None:
        self._stop_evt.set()

    def run(self) -> None:
        state = self._state
        collector = self._collector
        try:
            self._driver = collector._driver_factory(
                state.plug, collector.settings.driver_timeout_ms
            )
        except Exception as exc:
            collector.notifier.notify(
                "error", "driver-init", f"cannot construct driver: {exc}", state.plug.plug_id
            )
            state.halted = True
            return
        start = self._start_mono if self._start_mono is not None else time.monotonic()
        k = 0
        try:
            while not self._stop_evt.is_set():
                if self._slots is not None and k >= self._slots:
                    break
                deadline = start + k * self._interval_s
                wait = deadline - time.monotonic()
                if wait > 0:
                    if self._stop_evt.wait(wait):
                        break
                elif -wait > self._interval_s and k > 0:
                    # more than one slot behind: skip the missed deadlines
                    k += int(-wait / self._interval_s)
                    continue
                try:
                    collector._release_aged(state)
                    try:
                        reading = self._driver.poll()
                    except DriverError as exc:
                        collector._poll_failed(state, exc)
                    else:
                        ts = int(time.time() * 1000)
                        collector._ingest(state, ts, reading.power_w, reading.energy_counter_wh)
                except (StorageError, OSError) as exc:
                    collector.notifier.notify(
                        "fatal", "storage-failure", str(exc), state.plug.plug_id
                    )
                    state.halted = True
                    break
                k += 1
        finally:
            try:
                self._driver.close()
            except Exception:
                pass


class Collector:
    """Polls every configured plug and owns session attribution.

    ``interval_override_ms`` substitutes each plug's poll interval (a testing
    and simulation affordance that may go below the configured floor);
    ``start_at_mono`` aligns slot 0 of every poller to one shared monotonic
    deadline; ``slots`` bounds the run to that many scheduled slots, making
    the covered span exactly (slots - 1) * interval — an inclusive-end
    duration.
    """

    def __init__(
        self,
        logs_root: str | Path,
        plugs: Sequence[PlugConfig],
        settings: Optional[CollectorSettings] = None,
        notifier: Optional[Notifier] = None,
        driver_factory: Callable[[PlugConfig, int], Any] = get_driver,
        interval_override_ms: Optional[float] = None,
        start_at_mono: Optional[float] = None,
        slots: Optional[int] = None,
    ):
        if not plugs:
            raise CollectorError("no plugs to poll")
        self.logs_root = Path(logs_root)
        self.settings = settings or CollectorSettings()
        self.notifier = notifier or Notifier(self.logs_root)
        self._driver_factory = driver_factory
        self._start_at_mono = start_at_mono
        self._slots = slots
        self._states: dict[str, _PlugState] = {}
        for plug in plugs:
            if plug.plug_id in self._states:
                raise CollectorError(f"duplicate plug_id: {plug.plug_id}")
            interval = float(interval_override_ms or plug.poll_interval_ms)
            self._states[plug.plug_id] = _PlugState(
                plug=plug,
                standalone=StandaloneWriter(
                    self.logs_root, plug.plug_id, self.settings.flush_interval_s
                ),
                interval_ms=interval,
            )
        self._threads: list[_PollerThread] = []
        self._started = False

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "Collector":
        if self._started:
            raise CollectorError("collector already started")
        self._started = True
        for state in self._states.values():
            thread = _PollerThread(self, state, self._start_at_mono, self._slots)
            self._threads.append(thread)
            thread.start()
        return self

    def wait(self, timeout: Optional[float] = None) -> bool:
        """Block until every poller finished its slots; True if all are done."""
        end = None if timeout is None else time.monotonic() + timeout
        for thread in self._threads:
            remaining = None if end is None else max(0.0, end - time.monotonic())
            thread.join(remaining)
        return all(not t.is_alive() for t in self._threads)

    def stop(self) -> None:
        for thread in self._threads:
            thread.request_stop()
        for thread in self._threads:
            thread.join(timeout=10)
        for state in self._states.values():
            with state.lock:
                if state.session is not None:
                    self._close_session_locked(state, int(time.time() * 1000))
                # the standalone stream pauses indefinitely now; a later run
                # may resume the same day file, so the hole must be flagged
                self._flush_pendings_locked(state, flag_standalone=True)
                state.standalone.close()

    def __enter__(self) -> "Collector":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- sessions ----------------------------------------------------------

    def start_session(
        self, experiment_id: str, plug_id: str, notes: str = ""
    ) -> ExperimentSession:
        state = self._state(plug_id)
        with state.lock:
            if state.session is not None:
                raise SessionActiveError(
                    f"session {state.session.session_id} already active on plug {plug_id}"
                )
            start_ts = int(time.time() * 1000)
            session_id = self._fresh_session_id(experiment_id, start_ts)
            session = ExperimentSession(
                experiment_id=experiment_id,
                session_id=session_id,
                plug_id=plug_id,
                start_ts=start_ts,
                poll_interval_ms=state.interval_ms,
                notes=notes,
            )
            write_session_meta(self.logs_root, session)
            stream = SampleStream(
                session_samples_path(self.logs_root, experiment_id, session_id),
                plug_id,
                self.settings.flush_interval_s,
            )
            state.session = session
            state.session_stream = stream
            state.session_errors = 0
            state.session_first_ts = None
            state.session_last_ts = None
        self.notifier.notify(
            "info", "session-start", f"experiment {experiment_id}", plug_id
        )
        return session

    def stop_session(self, plug_id: str) -> ExperimentSession:
        state = self._state(plug_id)
        with state.lock:
            if state.session is None:
                if state.last_closed is not None:
                    log.warning(
                        "stop_session on plug %s: no active session, returning the "
                        "already-closed %s",
                        plug_id,
                        state.last_closed.session_id,
                    )
                    return state.last_closed
                raise CollectorError(f"no session to stop on plug {plug_id}")
            closed = self._close_session_locked(state, int(time.time() * 1000))
        self.notifier.notify(
            "info", "session-stop", f"session {closed.session_id} closed", plug_id
        )
        return closed

    @contextmanager
    def session(self, experiment_id: str, plug_id: str, notes: str = ""):
        """Scope a measurement: starts a session, always stops it on exit."""
        opened = self.start_session(experiment_id, plug_id, notes)
        try:
            yield opened
        finally:
            self.stop_session(plug_id)

    def active_session(self, plug_id: str) -> Optional[ExperimentSession]:
        state = self._state(plug_id)
        with state.lock:
            return state.session

    def status(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for plug_id, state in self._states.items():
            with state.lock:
                out[plug_id] = {
                    "session_id": state.session.session_id if state.session else None,
                    "consecutive_errors": state.consecutive_errors,
                    "samples_ok": state.samples_ok,
                    "last_sample_ts": state.last_sample.ts if state.last_sample else None,
                    "halted": state.halted,
                }
        return out

    # -- internals ---------------------------------------------------------

    def _state(self, plug_id: str) -> _PlugState:
        try:
            return self._states[plug_id]
        except KeyError:
            raise CollectorError(f"unknown plug: {plug_id}") from None

    def _fresh_session_id(self, experiment_id: str, start_ts: int) -> str:
        base = f"s{start_ts}"
        candidate, bump = base, 1
        while (
            session_meta_path(self.logs_root, experiment_id, candidate).exists()
            or session_samples_path(self.logs_root, experiment_id, candidate).exists()
        ):
            bump += 1
            candidate = f"{base}-{bump}"
        return candidate

    def _gap_threshold_ms(self, state: _PlugState) -> float:
        return self.settings.gap_factor * state.interval_ms

    def _write_pending(self, state: _PlugState, pending: _Pending, gap_after: bool) -> None:
        flags = ("gap-after",) if gap_after else ()
        if pending.stream_key == _STANDALONE:
            sample = state.standalone.append(
                pending.ts, pending.power_w, pending.counter_wh, flags
            )
        else:
            if state.session_stream is None or state.session is None or (
                state.session.session_id != pending.stream_key
            ):
                # stream closed between hold and release; drop with a trace
                log.warning("dropping pending sample for closed stream %s", pending.stream_key)
                return
            sample = state.session_stream.append(
                pending.ts, pending.power_w, pending.counter_wh, flags
            )
            if state.session_first_ts is None:
                state.session_first_ts = sample.ts
            state.session_last_ts = sample.ts
        state.last_sample = sample

    def _ingest(self, state: _PlugState, ts: int, power_w: float, counter_wh: Optional[float]) -> None:
        with state.lock:
            key = state.session.session_id if state.session is not None else _STANDALONE
            prev = state.pendings.pop(key, None)
            if prev is not None:
                gap = (ts - prev.ts) > self._gap_threshold_ms(state)
                self._write_pending(state, prev, gap_after=gap)
            state.pendings[key] = _Pending(ts, power_w, counter_wh, key)
            state.samples_ok += 1
            recovered = state.consecutive_errors >= self.settings.offline_after
            state.consecutive_errors = 0
        if recovered:
            self.notifier.notify(
                "info", "plug-recovered", "polling succeeded again", state.plug.plug_id
            )

    def _release_aged(self, state: _PlugState) -> None:
        """Flush pendings whose gap flag became certain by pure time passage."""
        now_ms = time.time() * 1000
        with state.lock:
            threshold = self._gap_threshold_ms(state)
            for key in [k for k, p in state.pendings.items() if now_ms - p.ts > threshold]:
                self._write_pending(state, state.pendings.pop(key), gap_after=True)

    def _poll_failed(self, state: _PlugState, exc: DriverError) -> None:
        with state.lock:
            state.consecutive_errors += 1
            count = state.consecutive_errors
            if state.session is not None:
                state.session_errors += 1
        self.notifier.notify("warn", exc.kind, exc.detail, state.plug.plug_id)
        if count == self.settings.offline_after:
            self.notifier.notify(
                "error",
                "plug-offline",
                f"{count} consecutive poll failures",
                state.plug.plug_id,
            )

    def _flush_pendings_locked(self, state: _PlugState, flag_standalone: bool) -> None:
        for key in list(state.pendings):
            pending = state.pendings.pop(key)
            flag = flag_standalone if key == _STANDALONE else False
            self._write_pending(state, pending, gap_after=flag)

    def _close_session_locked(self, state: _PlugState, now_ts: int) -> ExperimentSession:
        session = state.session
        assert session is not None
        key = session.session_id
        pending = state.pendings.pop(key, None)
        if pending is not None:
            # the window ends here, so no in-stream gap can follow this sample
            self._write_pending(state, pending, gap_after=False)
        if state.session_stream is not None:
            state.session_stream.close()
        start_ts = session.start_ts
        if state.session_first_ts is not None and state.session_first_ts < start_ts:
            start_ts = state.session_first_ts
        end_ts = max(now_ts, state.session_last_ts or now_ts, start_ts)
        closed = ExperimentSession(
            experiment_id=session.experiment_id,
            session_id=session.session_id,
            plug_id=session.plug_id,
            start_ts=start_ts,
            poll_interval_ms=session.poll_interval_ms,
            end_ts=end_ts,
            notes=session.notes,
            error_count=state.session_errors,
        )
        write_session_meta(self.logs_root, closed)
        state.session = None
        state.session_stream = None
        state.last_closed = closed
        return closed


def run_standalone(
    plug: PlugConfig,
    logs_root: str | Path,
    duration_s: Optional[float] = None,
    settings: Optional[CollectorSettings] = None,
    interval_override_ms: Optional[float] = None,
    experiment_id: Optional[str] = None,
    notes: str = "",
    stop_event: Optional[threading.Event] = None,
) -> Optional[ExperimentSession]:
    """Blocking convenience run over one plug; the CLI's logging core.

    With duration_s the schedule covers [0, duration] inclusively; without it
    the run continues until stop_event is set. When experiment_id is given
    the whole run is wrapped in one session, and the closed session returns.
    """
    interval_ms = float(interval_override_ms or plug.poll_interval_ms)
    slots = None
    if duration_s is not None:
        slots = int(round(duration_s * 1000.0 / interval_ms)) + 1
    collector = Collector(
        logs_root,
        [plug],
        settings=settings,
        interval_override_ms=interval_override_ms,
        slots=slots,
    )
    session: Optional[ExperimentSession] = None
    closed: Optional[ExperimentSession] = None
    # open the session before polling starts so slot 0 is attributed to it
    if experiment_id is not None:
        session = collector.start_session(experiment_id, plug.plug_id, notes)
    with collector:
        if slots is not None:
            deadline = time.monotonic() + (slots * interval_ms / 1000.0) + 5.0
            while not collector.wait(timeout=0.2):
                if stop_event is not None and stop_event.is_set():
                    break
                if time.monotonic() > deadline:
                    break
        else:
            while not (stop_event is not None and stop_event.is_set()):
                if collector.wait(timeout=0.2):
                    break
        if session is not None:
            closed = collector.stop_session(plug.plug_id)
    return closed
