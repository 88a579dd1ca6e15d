import json
import warnings

import pytest

from plugmeter.model import BaselineStats, ExperimentSession, PowerSample
from plugmeter.storage import (
    SampleStream,
    StandaloneWriter,
    StorageError,
    append_event,
    find_session,
    list_experiments,
    read_baseline,
    read_events,
    read_samples,
    read_samples_with_hash,
    read_session_meta,
    session_meta_path,
    session_samples_path,
    standalone_samples_path,
    write_baseline,
    write_session_meta,
)


def _sample(ts, seq, w=50.0, **kw):
    return PowerSample(ts, seq, "p1", w, **kw)


class TestSampleStream:
    def test_append_and_read_back(self, logs_root):
        path = session_samples_path(logs_root, "exp", "s1")
        stream = SampleStream(path, "p1", flush_interval_s=0)
        for i in range(5):
            stream.append(ts=1000 + i * 100, power_w=float(i), energy_counter_wh=None, flags=())
        stream.close()
        samples = read_samples(path)
        assert [s.seq for s in samples] == [1, 2, 3, 4, 5]
        assert [s.power_w for s in samples] == [0.0, 1.0, 2.0, 3.0, 4.0]

    def test_seq_resumes_from_existing_file(self, logs_root):
        path = session_samples_path(logs_root, "exp", "s1")
        stream = SampleStream(path, "p1", flush_interval_s=0)
        stream.append(ts=1000, power_w=1.0, energy_counter_wh=None, flags=())
        stream.append(ts=1100, power_w=2.0, energy_counter_wh=None, flags=())
        stream.close()

        again = SampleStream(path, "p1", flush_interval_s=0)
        again.append(ts=1200, power_w=3.0, energy_counter_wh=None, flags=())
        again.close()
        assert [s.seq for s in read_samples(path)] == [1, 2, 3]

    def test_seq_resume_ignores_torn_tail(self, logs_root):
        path = session_samples_path(logs_root, "exp", "s1")
        stream = SampleStream(path, "p1", flush_interval_s=0)
        stream.append(ts=1000, power_w=1.0, energy_counter_wh=None, flags=())
        stream.close()
        with path.open("a") as fh:
            fh.write('{"ts":1100,"seq":2,"plug":"p1","w":2')  # no newline, torn

        again = SampleStream(path, "p1", flush_interval_s=0)
        again.append(ts=1200, power_w=3.0, energy_counter_wh=None, flags=())
        again.close()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            samples = read_samples(path)
        assert [s.seq for s in samples] == [1, 2]

    def test_timestamps_never_go_backwards(self, logs_root):
        path = session_samples_path(logs_root, "exp", "s1")
        stream = SampleStream(path, "p1", flush_interval_s=0)
        stream.append(ts=2000, power_w=1.0, energy_counter_wh=None, flags=())
        stream.append(ts=1500, power_w=2.0, energy_counter_wh=None, flags=())  # clock stepped back
        stream.close()
        ts = [s.ts for s in read_samples(path)]
        assert ts[1] >= ts[0]


class TestReadSamples:
    def test_torn_final_line_is_a_warning(self, logs_root):
        path = logs_root / "torn.samples.jsonl"
        path.write_text(
            '{"ts":1,"seq":1,"plug":"p1","w":1.0}\n{"ts":2,"seq":2,"plug":"p1","w":2'
        )
        with pytest.warns(UserWarning):
            samples = read_samples(path)
        assert len(samples) == 1

    def test_malformed_middle_line_is_an_error_naming_the_line(self, logs_root):
        path = logs_root / "bad.samples.jsonl"
        path.write_text(
            '{"ts":1,"seq":1,"plug":"p1","w":1.0}\nGARBAGE\n{"ts":3,"seq":3,"plug":"p1","w":3.0}\n'
        )
        with pytest.raises(StorageError) as err:
            read_samples(path)
        assert "line 2" in str(err.value)

    def test_missing_file_is_an_error(self, logs_root):
        with pytest.raises(StorageError):
            read_samples(logs_root / "absent.jsonl")

    def test_hash_covers_exactly_the_consumed_bytes(self, logs_root):
        import hashlib

        path = logs_root / "h.samples.jsonl"
        body = '{"ts":1,"seq":1,"plug":"p1","w":1.0}\n{"ts":2,"seq":2,"plug":"p1","w":2.0}\n'
        path.write_text(body)
        samples, consumed, digest = read_samples_with_hash(path)
        assert len(samples) == 2
        assert consumed == len(body.encode())
        assert digest == hashlib.sha256(body.encode()).hexdigest()

    def test_hash_excludes_torn_tail(self, logs_root):
        import hashlib

        path = logs_root / "h2.samples.jsonl"
        good = '{"ts":1,"seq":1,"plug":"p1","w":1.0}\n'
        path.write_text(good + '{"ts":2,"seq"')
        with pytest.warns(UserWarning):
            samples, consumed, digest = read_samples_with_hash(path)
        assert consumed == len(good.encode())
        assert digest == hashlib.sha256(good.encode()).hexdigest()


class TestStandaloneWriter:
    def test_day_roll_uses_the_sample_timestamp(self, logs_root):
        writer = StandaloneWriter(logs_root, "p1", flush_interval_s=0)
        # 2024-01-01 23:59:59.5 UTC then 2024-01-02 00:00:00.5 UTC
        writer.append(ts=1704153599500, power_w=1.0, energy_counter_wh=None, flags=())
        writer.append(ts=1704153600500, power_w=2.0, energy_counter_wh=None, flags=())
        writer.close()
        day1 = standalone_samples_path(logs_root, "p1", "2024-01-01")
        day2 = standalone_samples_path(logs_root, "p1", "2024-01-02")
        assert len(read_samples(day1)) == 1
        assert len(read_samples(day2)) == 1

    def test_seq_continues_within_a_day(self, logs_root):
        writer = StandaloneWriter(logs_root, "p1", flush_interval_s=0)
        writer.append(ts=1704153600500, power_w=1.0, energy_counter_wh=None, flags=())
        writer.close()
        writer = StandaloneWriter(logs_root, "p1", flush_interval_s=0)
        writer.append(ts=1704153601500, power_w=2.0, energy_counter_wh=None, flags=())
        writer.close()
        day = standalone_samples_path(logs_root, "p1", "2024-01-02")
        assert [s.seq for s in read_samples(day)] == [1, 2]


class TestSessionMeta:
    def test_round_trip(self, logs_root):
        sess = ExperimentSession("exp", "s1", "p1", 1000, end_ts=2000, notes="x")
        write_session_meta(logs_root, sess)
        assert read_session_meta(logs_root, "exp", "s1") == sess

    def test_atomic_write_leaves_no_temp_files(self, logs_root):
        sess = ExperimentSession("exp", "s1", "p1", 1000)
        write_session_meta(logs_root, sess)
        write_session_meta(logs_root, sess.closed(2000))
        parent = session_meta_path(logs_root, "exp", "s1").parent
        assert [p.name for p in parent.glob("*.tmp*")] == []


class TestBaselines:
    def test_round_trip_and_missing(self, logs_root):
        assert read_baseline(logs_root, "p1") is None
        write_baseline(logs_root, BaselineStats("p1", 69.15, 2.45, 600, 120.0))
        back = read_baseline(logs_root, "p1")
        assert back is not None and back.mean_w == 69.15


class TestEvents:
    def test_append_and_tail(self, logs_root):
        for i in range(5):
            append_event(logs_root, "info", "k", str(i), ts=i)
        events = read_events(logs_root, limit=3)
        assert [e["detail"] for e in events] == ["2", "3", "4"]

    def test_corrupt_event_lines_are_skipped(self, logs_root):
        append_event(logs_root, "info", "k", "ok", ts=1)
        with (logs_root / "events.log").open("a") as fh:
            fh.write("not json\n")
        assert len(read_events(logs_root)) == 1


class TestCatalog:
    def _write_session(self, logs_root, exp, sid, n, closed=True, with_meta=True):
        path = session_samples_path(logs_root, exp, sid)
        stream = SampleStream(path, "p1", flush_interval_s=0)
        for i in range(n):
            stream.append(ts=1000 + i * 100, power_w=1.0, energy_counter_wh=None, flags=())
        stream.close()
        if with_meta:
            sess = ExperimentSession(exp, sid, "p1", 1000)
            if closed:
                sess = sess.closed(1000 + n * 100)
            write_session_meta(logs_root, sess)

    def test_lists_sessions_and_counts(self, logs_root):
        self._write_session(logs_root, "exp-a", "s1", 3)
        self._write_session(logs_root, "exp-a", "s2", 2, closed=False)
        self._write_session(logs_root, "exp-b", "s1", 1)
        catalog = {e.experiment_id: e for e in list_experiments(logs_root)}
        assert set(catalog) == {"exp-a", "exp-b"}
        a = {s.session_id: s for s in catalog["exp-a"].sessions}
        assert a["s1"].sample_count == 3 and not a["s1"].running
        assert a["s2"].running

    def test_orphaned_session_reconstructed_from_samples(self, logs_root):
        # samples but no meta: a collector that died before writing meta
        self._write_session(logs_root, "exp-a", "s9", 4, with_meta=False)
        catalog = list_experiments(logs_root)
        sess = catalog[0].sessions[0]
        assert sess.orphaned and sess.sample_count == 4
        assert sess.start_ts == 1000 and sess.end_ts == 1300

    def test_find_session(self, logs_root):
        self._write_session(logs_root, "exp-a", "s1", 1)
        assert find_session(logs_root, "exp-a", "s1") is not None
        assert find_session(logs_root, "exp-a", "nope") is None
        assert find_session(logs_root, "ghost", "s1") is None

    def test_empty_root(self, logs_root):
        assert list_experiments(logs_root) == []
