"""Deterministic power waveforms for the plug simulator.

Each waveform evaluates instantaneous watts at a time offset and provides the
closed-form integral used for exact device-counter emulation. Pure Python on
purpose: the simulator and collector must stay importable without pulling in
the numeric stack.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Any, Sequence

from plugmeter.model import PlugmeterError


class ScenarioError(PlugmeterError):
    """Malformed simulator scenario."""


class Waveform:
    def value(self, t_s: float) -> float:
        raise NotImplementedError

    def integral_ws(self, t0_s: float, t1_s: float) -> float:
        """Exact integral of the waveform over [t0, t1], in watt-seconds."""
        raise NotImplementedError

    def counter_wh(self, t_s: float) -> float:
        return self.integral_ws(0.0, t_s) / 3600.0

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Waveform):
    watts: float

    def __post_init__(self) -> None:
        if self.watts < 0:
            raise ScenarioError("constant watts must be nonnegative")

    def value(self, t_s: float) -> float:
        return self.watts

    def integral_ws(self, t0_s: float, t1_s: float) -> float:
        return self.watts * (t1_s - t0_s)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "constant", "watts": self.watts}


@dataclass(frozen=True)
class Square(Waveform):
    """Alternates high/low each half period, high first."""

    low_w: float
    high_w: float
    period_s: float

    def __post_init__(self) -> None:
        if self.period_s <= 0:
            raise ScenarioError("square period must be positive")
        if self.low_w < 0 or self.high_w < 0:
            raise ScenarioError("square levels must be nonnegative")

    def value(self, t_s: float) -> float:
        phase = t_s % self.period_s
        return self.high_w if phase < self.period_s / 2 else self.low_w

    def integral_ws(self, t0_s: float, t1_s: float) -> float:
        return self._cumulative(t1_s) - self._cumulative(t0_s)

    def _cumulative(self, t_s: float) -> float:
        half = self.period_s / 2
        full, phase = divmod(t_s, self.period_s)
        acc = full * half * (self.high_w + self.low_w)
        acc += self.high_w * min(phase, half)
        acc += self.low_w * max(0.0, phase - half)
        return acc

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "square", "low_w": self.low_w, "high_w": self.high_w, "period_s": self.period_s}


@dataclass(frozen=True)
class Ramp(Waveform):
    """Linear from w0 at t=0 to w1 at t=duration, holding w1 afterwards."""

    w0: float
    w1: float
    duration_s: float

    def value(self, t_s: float) -> float:
        if self.duration_s <= 0 or t_s >= self.duration_s:
            return self.w1
        if t_s <= 0:
            return self.w0
        return self.w0 + (self.w1 - self.w0) * (t_s / self.duration_s)

    def integral_ws(self, t0_s: float, t1_s: float) -> float:
        return self._cumulative(t1_s) - self._cumulative(t0_s)

    def _cumulative(self, t_s: float) -> float:
        if t_s <= 0:
            return self.w0 * t_s
        ramp_end = min(t_s, self.duration_s)
        # trapezoid over the ramp portion, rectangle afterwards
        acc = (self.w0 + self.value(ramp_end)) / 2 * ramp_end
        if t_s > self.duration_s:
            acc += self.w1 * (t_s - self.duration_s)
        return acc

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "ramp", "w0": self.w0, "w1": self.w1, "duration_s": self.duration_s}


@dataclass(frozen=True)
class Trace(Waveform):
    """Piecewise-linear through (t_s, w) points; clamped outside the range."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ScenarioError("trace waveform needs at least 2 points")
        times = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScenarioError("trace waveform times must be strictly increasing")

    def value(self, t_s: float) -> float:
        times = [p[0] for p in self.points]
        if t_s <= times[0]:
            return self.points[0][1]
        if t_s >= times[-1]:
            return self.points[-1][1]
        i = bisect.bisect_right(times, t_s) - 1
        (ta, wa), (tb, wb) = self.points[i], self.points[i + 1]
        return wa + (wb - wa) * (t_s - ta) / (tb - ta)

    def integral_ws(self, t0_s: float, t1_s: float) -> float:
        return self._cumulative(t1_s) - self._cumulative(t0_s)

    def _cumulative(self, t_s: float) -> float:
        times = [p[0] for p in self.points]
        acc = 0.0
        if t_s <= times[0]:
            return self.points[0][1] * (t_s - times[0])
        prev_t, prev_w = self.points[0]
        for t, w in self.points[1:]:
            if t_s < t:
                w_here = self.value(t_s)
                acc += (prev_w + w_here) / 2 * (t_s - prev_t)
                return acc
            acc += (prev_w + w) / 2 * (t - prev_t)
            prev_t, prev_w = t, w
        acc += prev_w * (t_s - prev_t)
        return acc

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "trace", "points": [list(p) for p in self.points]}


@dataclass(frozen=True)
class Sine(Waveform):
    """mean + amplitude * sin(2*pi*t/period); amplitude must not exceed mean."""

    mean_w: float
    amplitude_w: float
    period_s: float

    def __post_init__(self) -> None:
        if self.amplitude_w > self.mean_w:
            raise ScenarioError("sine amplitude exceeding the mean would go negative")
        if self.period_s <= 0:
            raise ScenarioError("sine period must be positive")

    def value(self, t_s: float) -> float:
        return self.mean_w + self.amplitude_w * math.sin(2 * math.pi * t_s / self.period_s)

    def integral_ws(self, t0_s: float, t1_s: float) -> float:
        w = 2 * math.pi / self.period_s
        return self.mean_w * (t1_s - t0_s) - self.amplitude_w / w * (
            math.cos(w * t1_s) - math.cos(w * t0_s)
        )

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "sine", "mean_w": self.mean_w, "amplitude_w": self.amplitude_w, "period_s": self.period_s}


def parse_waveform(obj: Any) -> Waveform:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ScenarioError(f"waveform must be an object with a 'kind', got {obj!r}")
    kind = obj["kind"]
    try:
        if kind == "constant":
            return Constant(float(obj["watts"]))
        if kind == "square":
            return Square(float(obj["low_w"]), float(obj["high_w"]), float(obj["period_s"]))
        if kind == "ramp":
            return Ramp(float(obj["w0"]), float(obj["w1"]), float(obj["duration_s"]))
        if kind == "trace":
            points = tuple((float(t), float(w)) for t, w in obj["points"])
            return Trace(points)
        if kind == "sine":
            return Sine(float(obj["mean_w"]), float(obj["amplitude_w"]), float(obj["period_s"]))
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad {kind} waveform: {exc}") from None
    raise ScenarioError(f"unknown waveform kind: {kind!r}")
