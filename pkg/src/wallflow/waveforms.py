"""Inlet/outlet pressure waveforms with exact per-step averaging.

The scheme consumes the *mean* of the pressure data over each step,
(1/dt) * integral of P over (t_n, t_n+1); closed-form waveforms integrate
exactly and sampled ones are piecewise linear, for which the trapezoid
rule over the sample knots is exact.  Squared-L2 norms over (0, T) back the
uniform energy bound and are exact as well.
"""

import math

import numpy as np

from .errors import ValidationError


class Constant:
    def __init__(self, value):
        self.value = float(value)

    def __call__(self, t):
        return self.value + 0.0 * np.asarray(t, dtype=float)

    def average(self, t0, t1):
        return self.value

    def l2_norm_sq(self, t0, t1):
        return self.value**2 * (t1 - t0)


class Sine:
    """amplitude * sin(2*pi*frequency*t + phase)."""

    def __init__(self, amplitude, frequency, phase=0.0):
        self.amplitude = float(amplitude)
        self.omega = 2.0 * math.pi * float(frequency)
        self.phase = float(phase)

    def __call__(self, t):
        return self.amplitude * np.sin(self.omega * np.asarray(t, dtype=float)
                                       + self.phase)

    def average(self, t0, t1):
        if t1 <= t0:
            raise ValidationError("average needs t1 > t0")
        if self.omega == 0.0:
            return self.amplitude * math.sin(self.phase)
        a, w, p = self.amplitude, self.omega, self.phase
        return a * (math.cos(w * t0 + p) - math.cos(w * t1 + p)) / (w * (t1 - t0))

    def l2_norm_sq(self, t0, t1):
        a, w, p = self.amplitude, self.omega, self.phase
        if w == 0.0:
            return (a * math.sin(p))**2 * (t1 - t0)

        def anti(t):
            return t / 2.0 - math.sin(2.0 * (w * t + p)) / (4.0 * w)

        return a * a * (anti(t1) - anti(t0))


class HalfCosinePulse:
    """Smooth single pulse amplitude * (1 - cos(2*pi*t/duration)) / 2 on
    [0, duration], zero afterwards (C1 across the end)."""

    def __init__(self, amplitude, duration):
        if duration <= 0.0:
            raise ValidationError("pulse duration must be positive")
        self.amplitude = float(amplitude)
        self.duration = float(duration)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t < self.duration)
        out = np.zeros_like(t)
        out[inside] = 0.5 * self.amplitude * (
            1.0 - np.cos(2.0 * math.pi * t[inside] / self.duration))
        return out

    def _anti(self, t):
        # antiderivative of the pulse on [0, duration]
        tau = self.duration
        return 0.5 * self.amplitude * (t - tau / (2.0 * math.pi)
                                       * math.sin(2.0 * math.pi * t / tau))

    def average(self, t0, t1):
        if t1 <= t0:
            raise ValidationError("average needs t1 > t0")
        a = min(max(t0, 0.0), self.duration)
        b = min(max(t1, 0.0), self.duration)
        if b <= a:
            return 0.0
        return (self._anti(b) - self._anti(a)) / (t1 - t0)

    def l2_norm_sq(self, t0, t1):
        a = min(max(t0, 0.0), self.duration)
        b = min(max(t1, 0.0), self.duration)
        if b <= a:
            return 0.0
        amp, tau = self.amplitude, self.duration
        w = 2.0 * math.pi / tau

        def anti(t):
            # integral of ((1 - cos(w t)) / 2)^2
            return (1.5 * t - 2.0 * math.sin(w * t) / w
                    + math.sin(2.0 * w * t) / (4.0 * w)) / 4.0

        return amp * amp * (anti(b) - anti(a))


class Sampled:
    """Piecewise-linear waveform through strictly increasing samples.

    Queries outside the sampled range are rejected rather than
    extrapolated; a run must be covered by its samples.
    """

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.size == 0:
            raise ValidationError("sampled waveform has no samples")
        if self.times.size != self.values.size:
            raise ValidationError("sampled waveform columns differ in length")
        if not np.all(np.diff(self.times) > 0):
            raise ValidationError("sampled waveform time column must be "
                                  "strictly increasing")

    def _check_range(self, t0, t1):
        if t0 < self.times[0] - 1e-12 or t1 > self.times[-1] + 1e-12:
            raise ValidationError(
                f"sampled waveform covers [{self.times[0]:g}, {self.times[-1]:g}] "
                f"but [{t0:g}, {t1:g}] was requested")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        self._check_range(float(np.min(t)), float(np.max(t)))
        return np.interp(t, self.times, self.values)

    def _knots(self, t0, t1):
        inner = self.times[(self.times > t0) & (self.times < t1)]
        return np.concatenate([[t0], inner, [t1]])

    def average(self, t0, t1):
        if t1 <= t0:
            raise ValidationError("average needs t1 > t0")
        self._check_range(t0, t1)
        ts = self._knots(t0, t1)
        vs = np.interp(ts, self.times, self.values)
        return float(np.trapezoid(vs, ts)) / (t1 - t0)

    def l2_norm_sq(self, t0, t1):
        self._check_range(t0, t1)
        ts = self._knots(t0, t1)
        vs = np.interp(ts, self.times, self.values)
        seg = np.diff(ts)
        f0, f1 = vs[:-1], vs[1:]
        return float(np.sum(seg * (f0 * f0 + f0 * f1 + f1 * f1) / 3.0))
