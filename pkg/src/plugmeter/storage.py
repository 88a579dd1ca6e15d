"""Durable, append-only, human-auditable persistence.

Directory layout under one logs root:

    experiments/<experiment_id>/<session_id>.samples.jsonl
    experiments/<experiment_id>/<session_id>.meta.json
    standalone/<plug_id>/<YYYY-MM-DD>.samples.jsonl
    baselines/<plug_id>.json
    events.log

Sample files hold one JSON object per line with keys in the pinned order
``ts, seq, plug, w`` plus optional ``wh`` and ``flags`` (docs/log-format.md).
Files are append-only; metadata files are replaced atomically via rename.
One writer per file at a time; any number of concurrent readers.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Optional

from plugmeter.model import BaselineStats, ExperimentSession, PlugmeterError, PowerSample

log = logging.getLogger(__name__)

SAMPLES_SUFFIX = ".samples.jsonl"
META_SUFFIX = ".meta.json"


class StorageError(PlugmeterError):
    """I/O failure or corrupted (non-crash-artifact) file content."""


def experiments_dir(root: Path) -> Path:
    return Path(root) / "experiments"


def session_samples_path(root: Path, experiment_id: str, session_id: str) -> Path:
    return experiments_dir(root) / experiment_id / f"{session_id}{SAMPLES_SUFFIX}"


def session_meta_path(root: Path, experiment_id: str, session_id: str) -> Path:
    return experiments_dir(root) / experiment_id / f"{session_id}{META_SUFFIX}"


def utc_day(ts_ms: int) -> str:
    return datetime.fromtimestamp(ts_ms / 1000, tz=timezone.utc).strftime("%Y-%m-%d")


def standalone_samples_path(root: Path, plug_id: str, day: str) -> Path:
    return Path(root) / "standalone" / plug_id / f"{day}{SAMPLES_SUFFIX}"


def baseline_path(root: Path, plug_id: str) -> Path:
    return Path(root) / "baselines" / f"{plug_id}.json"


def events_path(root: Path) -> Path:
    return Path(root) / "events.log"


def _atomic_write_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    tmp.replace(path)


def _tail_last_complete_line(path: Path, chunk: int = 8192) -> Optional[str]:
    """Last newline-terminated line of a file, or None."""
    try:
        size = path.stat().st_size
    except FileNotFoundError:
        return None
    if size == 0:
        return None
    with open(path, "rb") as fh:
        fh.seek(max(0, size - chunk))
        data = fh.read()
    # the final line may be torn (no trailing newline); ignore it
    complete, _, _ = data.rpartition(b"\n")
    if not complete:
        return None
    return complete.rsplit(b"\n", 1)[-1].decode("utf-8", errors="replace")


def _trim_torn_tail(path: Path, chunk: int = 65536) -> None:
    """Drop an unterminated final line before resuming an existing file.

    A crash can leave a partial line; appending after it would glue the next
    record onto the fragment and corrupt both. The fragment was never a
    complete record, so truncating it keeps the crash contract of losing at
    most that one line.
    """
    try:
        size = path.stat().st_size
    except FileNotFoundError:
        return
    if size == 0:
        return
    with open(path, "rb+") as fh:
        pos = size
        while pos > 0:
            start = max(0, pos - chunk)
            fh.seek(start)
            block = fh.read(pos - start)
            if pos == size and block.endswith(b"\n"):
                return
            cut = block.rfind(b"\n")
            if cut >= 0:
                keep = start + cut + 1
                warnings.warn(
                    f"truncating torn final line ({size - keep} bytes) in {path}",
                    stacklevel=3,
                )
                fh.truncate(keep)
                return
            pos = start
        warnings.warn(f"truncating torn only line ({size} bytes) in {path}", stacklevel=3)
        fh.truncate(0)


class SampleStream:
    """Single-writer append handle for one samples file.

    Assigns the per-file ``seq`` (resuming after the last complete line when
    the file already exists) and enforces non-decreasing timestamps. Lines are
    flushed at least every ``flush_interval_s``; a non-positive interval
    flushes every sample.
    """

    def __init__(self, path: str | Path, plug_id: str, flush_interval_s: float = 1.0):
        self.path = Path(path)
        self.plug_id = plug_id
        self.flush_interval_s = flush_interval_s
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._next_seq = 1
        self._last_ts: Optional[int] = None
        _trim_torn_tail(self.path)
        last = _tail_last_complete_line(self.path)
        if last is not None:
            try:
                prev = PowerSample.from_line(last)
                self._next_seq = prev.seq + 1
                self._last_ts = prev.ts
            except (ValueError, json.JSONDecodeError):
                raise StorageError(f"cannot resume {self.path}: last line is corrupt")
        self._fh = open(self.path, "a", encoding="utf-8")
        self._last_flush = time.monotonic()

    def append(
        self,
        ts: int,
        power_w: float,
        energy_counter_wh: Optional[float] = None,
        flags: Iterable[str] = (),
    ) -> PowerSample:
        if self._last_ts is not None and ts < self._last_ts:
            # wall clock stepped backwards; keep the stream monotone
            log.debug("clamping ts %d to stream max %d in %s", ts, self._last_ts, self.path)
            ts = self._last_ts
        sample = PowerSample(
            ts=ts,
            seq=self._next_seq,
            plug_id=self.plug_id,
            power_w=power_w,
            energy_counter_wh=energy_counter_wh,
            flags=frozenset(flags),
        )
        self._fh.write(sample.to_line() + "\n")
        self._next_seq += 1
        self._last_ts = ts
        now = time.monotonic()
        if self.flush_interval_s <= 0 or now - self._last_flush >= self.flush_interval_s:
            self._fh.flush()
            self._last_flush = now
        return sample

    @property
    def next_seq(self) -> int:
        return self._next_seq

    def flush(self) -> None:
        self._fh.flush()
        self._last_flush = time.monotonic()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.flush()
            self._fh.close()

    def __enter__(self) -> "SampleStream":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class StandaloneWriter:
    """Appends to per-day standalone files, rolling at UTC midnight.

    The roll is keyed on each sample's own timestamp, so replayed or
    simulated clocks behave identically to wall time. ``seq`` restarts at 1
    in each day file; (file, seq) stays globally unique.
    """

    def __init__(self, root: str | Path, plug_id: str, flush_interval_s: float = 1.0):
        self.root = Path(root)
        self.plug_id = plug_id
        self.flush_interval_s = flush_interval_s
        self._day: Optional[str] = None
        self._stream: Optional[SampleStream] = None

    def append(
        self,
        ts: int,
        power_w: float,
        energy_counter_wh: Optional[float] = None,
        flags: Iterable[str] = (),
    ) -> PowerSample:
        day = utc_day(ts)
        if self._stream is None or day != self._day:
            if self._stream is not None:
                self._stream.close()
            self._stream = SampleStream(
                standalone_samples_path(self.root, self.plug_id, day),
                self.plug_id,
                self.flush_interval_s,
            )
            self._day = day
        return self._stream.append(ts, power_w, energy_counter_wh, flags)

    @property
    def current_path(self) -> Optional[Path]:
        return self._stream.path if self._stream is not None else None

    def flush(self) -> None:
        if self._stream is not None:
            self._stream.flush()

    def close(self) -> None:
        if self._stream is not None:
            self._stream.close()
            self._stream = None


def read_samples(
    path: str | Path,
    t0: Optional[int] = None,
    t1: Optional[int] = None,
) -> list[PowerSample]:
    """Read all complete samples from a file, optionally range-filtered.

    A torn final line (crash artifact) is skipped with a warning. A malformed
    line anywhere else is corruption and raises StorageError naming the line.
    """
    samples, _, _ = read_samples_with_hash(Path(path), t0, t1)
    return samples


def read_samples_with_hash(
    path: str | Path,
    t0: Optional[int] = None,
    t1: Optional[int] = None,
) -> tuple[list[PowerSample], int, str]:
    """Like read_samples, plus (bytes_consumed, sha256) of the parsed prefix.

    The hash covers exactly the complete lines that produced the returned
    samples (before range filtering), so a report can pin its inputs even
    while a writer is appending.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise StorageError(f"no such samples file: {path}") from None
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from None

    complete, sep, torn = data.rpartition(b"\n")
    if sep:
        consumed = len(complete) + 1
    else:
        complete, consumed = b"", 0
        torn = data
    if torn:
        warnings.warn(
            f"skipping torn final line ({len(torn)} bytes) in {path}",
            stacklevel=2,
        )

    samples: list[PowerSample] = []
    if complete:
        lines = complete.split(b"\n")
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                sample = PowerSample.from_line(line.decode("utf-8"))
            except (ValueError, json.JSONDecodeError, UnicodeDecodeError):
                if i == len(lines) - 1 and not torn:
                    # newline-terminated but unparseable tail: treat as a
                    # crash artifact too; everything before it is intact
                    warnings.warn(
                        f"skipping corrupt final line {i + 1} in {path}",
                        stacklevel=2,
                    )
                    continue
                raise StorageError(f"{path}: malformed sample at line {i + 1}")
            samples.append(sample)

    if t0 is not None:
        samples = [s for s in samples if s.ts >= t0]
    if t1 is not None:
        samples = [s for s in samples if s.ts <= t1]
    digest = hashlib.sha256(data[:consumed]).hexdigest()
    return samples, consumed, digest


def write_session_meta(root: str | Path, session: ExperimentSession) -> None:
    _atomic_write_json(
        session_meta_path(Path(root), session.experiment_id, session.session_id),
        session.to_dict(),
    )


def read_session_meta(root: str | Path, experiment_id: str, session_id: str) -> ExperimentSession:
    path = session_meta_path(Path(root), experiment_id, session_id)
    try:
        return ExperimentSession.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise StorageError(f"no meta for session {experiment_id}/{session_id}") from None
    except (ValueError, KeyError) as exc:
        raise StorageError(f"corrupt meta {path}: {exc}") from None


def write_baseline(root: str | Path, baseline: BaselineStats) -> None:
    _atomic_write_json(baseline_path(Path(root), baseline.plug_id), baseline.to_dict())


def read_baseline(root: str | Path, plug_id: str) -> Optional[BaselineStats]:
    path = baseline_path(Path(root), plug_id)
    try:
        return BaselineStats.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except FileNotFoundError:
        return None
    except (ValueError, KeyError) as exc:
        raise StorageError(f"corrupt baseline {path}: {exc}") from None


def append_event(
    root: str | Path,
    severity: str,
    kind: str,
    detail: str,
    plug_id: Optional[str] = None,
    ts: Optional[int] = None,
) -> dict[str, Any]:
    """Append one event line to events.log and return the event."""
    event: dict[str, Any] = {
        "ts": int(time.time() * 1000) if ts is None else ts,
        "severity": severity,
        "kind": kind,
    }
    if plug_id is not None:
        event["plug_id"] = plug_id
    event["detail"] = detail
    path = events_path(Path(root))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(event, separators=(",", ":")) + "\n")
        fh.flush()
    return event


def read_events(
    root: str | Path,
    since_ts: Optional[int] = None,
    limit: Optional[int] = None,
) -> list[dict[str, Any]]:
    path = events_path(Path(root))
    if not path.exists():
        return []
    events: list[dict[str, Any]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn tail
            if since_ts is not None and event.get("ts", 0) <= since_ts:
                continue
            events.append(event)
    if limit is not None:
        events = events[-limit:]
    return events


@dataclass(frozen=True)
class SessionInfo:
    """Catalog entry for one session, possibly reconstructed from samples."""

    experiment_id: str
    session_id: str
    plug_id: str
    start_ts: int
    end_ts: Optional[int]
    sample_count: int
    running: bool
    orphaned: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "plug_id": self.plug_id,
            "start_ts": self.start_ts,
            "end_ts": self.end_ts,
            "sample_count": self.sample_count,
            "running": self.running,
            "orphaned": self.orphaned,
        }


@dataclass(frozen=True)
class ExperimentInfo:
    experiment_id: str
    sessions: tuple[SessionInfo, ...]

    @property
    def latest_start_ts(self) -> int:
        return max((s.start_ts for s in self.sessions), default=0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "experiment_id": self.experiment_id,
            "sessions": [s.to_dict() for s in self.sessions],
        }


def _count_samples(path: Path) -> tuple[int, Optional[int], Optional[int], Optional[str]]:
    """(count, first_ts, last_ts, plug_id) scanning complete lines only."""
    try:
        samples, _, _ = read_samples_with_hash(path)
    except StorageError:
        return 0, None, None, None
    if not samples:
        return 0, None, None, None
    return len(samples), samples[0].ts, samples[-1].ts, samples[0].plug_id


def list_experiments(root: str | Path) -> list[ExperimentInfo]:
    """Catalog every experiment under the root, most recent first.

    Sessions with a meta file use it; sessions whose meta is missing are
    listed as orphaned with start/end inferred from their first/last sample.
    """
    root = Path(root)
    base = experiments_dir(root)
    catalog: list[ExperimentInfo] = []
    if not base.exists():
        return catalog
    for exp_dir in sorted(p for p in base.iterdir() if p.is_dir()):
        experiment_id = exp_dir.name
        session_ids: set[str] = set()
        for child in exp_dir.iterdir():
            if child.name.endswith(SAMPLES_SUFFIX):
                session_ids.add(child.name[: -len(SAMPLES_SUFFIX)])
            elif child.name.endswith(META_SUFFIX):
                session_ids.add(child.name[: -len(META_SUFFIX)])
        sessions: list[SessionInfo] = []
        for session_id in sorted(session_ids):
            samples_file = session_samples_path(root, experiment_id, session_id)
            count, first_ts, last_ts, plug_id = (
                _count_samples(samples_file) if samples_file.exists() else (0, None, None, None)
            )
            try:
                meta = read_session_meta(root, experiment_id, session_id)
                sessions.append(
                    SessionInfo(
                        experiment_id=experiment_id,
                        session_id=session_id,
                        plug_id=meta.plug_id,
                        start_ts=meta.start_ts,
                        end_ts=meta.end_ts,
                        sample_count=count,
                        running=meta.end_ts is None,
                    )
                )
            except StorageError:
                if count == 0:
                    continue  # nothing to reconstruct from
                sessions.append(
                    SessionInfo(
                        experiment_id=experiment_id,
                        session_id=session_id,
                        plug_id=plug_id or "unknown",
                        start_ts=first_ts or 0,
                        end_ts=last_ts,
                        sample_count=count,
                        running=False,
                        orphaned=True,
                    )
                )
        if sessions:
            sessions.sort(key=lambda s: (-s.start_ts, s.session_id))
            catalog.append(ExperimentInfo(experiment_id, tuple(sessions)))
    catalog.sort(key=lambda e: -e.latest_start_ts)
    return catalog


def find_session(root: str | Path, experiment_id: str, session_id: str) -> Optional[SessionInfo]:
    for exp in list_experiments(root):
        if exp.experiment_id != experiment_id:
            continue
        for sess in exp.sessions:
            if sess.session_id == session_id:
                return sess
    return None
