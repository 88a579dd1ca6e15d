import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plugmeter.drivers.waveforms import (
    Constant,
    Ramp,
    ScenarioError,
    Sine,
    Square,
    Trace,
    parse_waveform,
)


class TestConstant:
    def test_value_and_integral(self):
        w = Constant(50.0)
        assert w.value(0) == 50.0 and w.value(123.4) == 50.0
        assert w.integral_ws(2.0, 5.0) == pytest.approx(150.0, rel=1e-12)
        assert w.counter_wh(7200.0) == pytest.approx(100.0, rel=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(ScenarioError):
            Constant(-1.0)


class TestSquare:
    def test_high_phase_comes_first(self):
        w = Square(low_w=20.0, high_w=80.0, period_s=2.0)
        assert w.value(0.0) == 80.0
        assert w.value(0.99) == 80.0
        assert w.value(1.0) == 20.0
        assert w.value(2.0) == 80.0

    def test_integral_whole_and_partial_cycles(self):
        w = Square(low_w=20.0, high_w=80.0, period_s=2.0)
        assert w.integral_ws(0.0, 3.0) == pytest.approx(180.0, rel=1e-12)
        # 0.5 s high + 1 s low + 0.5 s high
        assert w.integral_ws(0.5, 2.5) == pytest.approx(100.0, rel=1e-12)

    def test_integral_matches_numeric(self):
        w = Square(low_w=5.0, high_w=95.0, period_s=1.7)
        t0, t1, n = 0.3, 12.9, 200000
        dt = (t1 - t0) / n
        riemann = sum(w.value(t0 + (i + 0.5) * dt) for i in range(n)) * dt
        assert w.integral_ws(t0, t1) == pytest.approx(riemann, rel=1e-3)


class TestRamp:
    def test_shape(self):
        w = Ramp(w0=0.0, w1=100.0, duration_s=10.0)
        assert w.value(0.0) == 0.0
        assert w.value(5.0) == 50.0
        assert w.value(15.0) == 100.0  # holds the final level

    def test_integral(self):
        w = Ramp(w0=0.0, w1=100.0, duration_s=10.0)
        assert w.integral_ws(0.0, 10.0) == pytest.approx(500.0, rel=1e-12)
        assert w.integral_ws(0.0, 20.0) == pytest.approx(1500.0, rel=1e-12)


class TestTrace:
    def test_interpolation_and_clamping(self):
        w = Trace(points=((0.0, 0.0), (10.0, 100.0)))
        assert w.value(5.0) == 50.0
        assert w.value(-3.0) == 0.0
        assert w.value(99.0) == 100.0
        assert w.integral_ws(0.0, 10.0) == pytest.approx(500.0, rel=1e-12)

    def test_times_must_increase(self):
        with pytest.raises(ScenarioError):
            Trace(points=((0.0, 1.0), (0.0, 2.0)))


class TestSine:
    def test_value_and_full_period_mean(self):
        w = Sine(mean_w=80.0, amplitude_w=20.0, period_s=60.0)
        assert w.value(0.0) == pytest.approx(80.0)
        assert max(w.value(t / 10) for t in range(600)) <= 100.0 + 1e-9
        # over whole periods only the mean survives
        assert w.integral_ws(0.0, 120.0) == pytest.approx(80.0 * 120.0, rel=1e-12)

    def test_quarter_period_closed_form(self):
        w = Sine(mean_w=80.0, amplitude_w=20.0, period_s=1.0)
        omega = 2 * math.pi
        expected = 80.0 * 0.25 - (20.0 / omega) * (math.cos(omega * 0.25) - 1.0)
        assert w.integral_ws(0.0, 0.25) == pytest.approx(expected, rel=1e-12)

    def test_amplitude_cannot_exceed_mean(self):
        # keeps the waveform nonnegative, as real power draw is
        with pytest.raises(ScenarioError):
            Sine(mean_w=10.0, amplitude_w=11.0, period_s=1.0)


class TestParse:
    @pytest.mark.parametrize(
        "obj",
        [
            {"kind": "constant", "watts": 42.0},
            {"kind": "square", "low_w": 1.0, "high_w": 9.0, "period_s": 3.0},
            {"kind": "ramp", "w0": 5.0, "w1": 50.0, "duration_s": 30.0},
            {"kind": "trace", "points": [[0.0, 1.0], [5.0, 2.0]]},
            {"kind": "sine", "mean_w": 80.0, "amplitude_w": 20.0, "period_s": 60.0},
        ],
    )
    def test_round_trip(self, obj):
        w = parse_waveform(obj)
        assert parse_waveform(w.to_dict()).to_dict() == w.to_dict()

    def test_unknown_kind(self):
        with pytest.raises(ScenarioError):
            parse_waveform({"kind": "sawtooth"})


# trapezoid is exact on piecewise-linear signals when every breakpoint is
# sampled; this is the analytic half of the integration oracle
@st.composite
def linear_traces(draw):
    n = draw(st.integers(min_value=2, max_value=8))
    times = sorted(
        draw(
            st.lists(
                st.floats(min_value=0.0, max_value=100.0, allow_nan=False),
                min_size=n, max_size=n, unique=True,
            )
        )
    )
    values = draw(
        st.lists(
            st.floats(min_value=0.0, max_value=1000.0, allow_nan=False),
            min_size=n, max_size=n,
        )
    )
    return Trace(points=tuple(zip(times, values)))


@given(trace=linear_traces(), extra=st.lists(st.floats(min_value=0.0, max_value=1.0), max_size=10))
@settings(max_examples=120, deadline=None)
def test_trapezoid_exact_on_piecewise_linear(trace, extra):
    times = [t for t, _ in trace.points]
    t_lo, t_hi = times[0], times[-1]
    sample_ts = sorted(set(times) | {t_lo + frac * (t_hi - t_lo) for frac in extra})
    values = [trace.value(t) for t in sample_ts]
    trapezoid = sum(
        (values[i] + values[i + 1]) / 2.0 * (sample_ts[i + 1] - sample_ts[i])
        for i in range(len(sample_ts) - 1)
    )
    analytic = trace.integral_ws(t_lo, t_hi)
    assert trapezoid == pytest.approx(analytic, rel=1e-9, abs=1e-9)
