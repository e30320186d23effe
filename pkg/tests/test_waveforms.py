import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wallflow import waveforms as wf
from wallflow.errors import ValidationError


def numeric_average(fn, t0, t1, n=200001):
    t = np.linspace(t0, t1, n)
    return np.trapezoid(fn(t), t) / (t1 - t0)


def test_constant_average_is_the_value():
    w = wf.Constant(4.2)
    assert w.average(0.0, 0.37) == 4.2
    assert w.l2_norm_sq(0.0, 2.0) == pytest.approx(4.2**2 * 2.0, rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(t0=st.floats(min_value=0.0, max_value=5.0),
       width=st.floats(min_value=1e-3, max_value=3.0),
       value=st.floats(min_value=-1e4, max_value=1e4))
def test_constant_average_any_interval(t0, width, value):
    assert wf.Constant(value).average(t0, t0 + width) == value


def test_sine_average_closed_form():
    # unit-amplitude sin(t): the step average is (cos t0 - cos t1) / dt
    w = wf.Sine(amplitude=1.0, frequency=1.0 / (2.0 * math.pi))
    t0, t1 = 0.3, 0.95
    expected = (math.cos(t0) - math.cos(t1)) / (t1 - t0)
    assert w.average(t0, t1) == pytest.approx(expected, rel=1e-14)
    assert w.average(t0, t1) == pytest.approx(
        numeric_average(w, t0, t1), rel=1e-9)


def test_sine_l2_norm_matches_quadrature():
    w = wf.Sine(amplitude=2.5, frequency=3.0, phase=0.4)
    t = np.linspace(0.0, 1.3, 400001)
    ref = np.trapezoid(w(t)**2, t)
    assert w.l2_norm_sq(0.0, 1.3) == pytest.approx(ref, rel=1e-9)


def test_pulse_average_and_support():
    w = wf.HalfCosinePulse(amplitude=2.0e4, duration=0.005)
    assert w.average(0.006, 0.007) == 0.0
    assert w.average(0.0, 0.005) == pytest.approx(1.0e4, rel=1e-12)
    t0, t1 = 0.004, 0.0062     # straddles the pulse end
    assert w.average(t0, t1) == pytest.approx(
        numeric_average(w, t0, t1), rel=1e-7)
    assert w(np.array([0.0025]))[0] == pytest.approx(2.0e4, rel=1e-12)


def test_pulse_l2_norm_matches_quadrature():
    w = wf.HalfCosinePulse(amplitude=3.0, duration=0.8)
    t = np.linspace(0.0, 1.0, 400001)
    ref = np.trapezoid(w(t)**2, t)
    assert w.l2_norm_sq(0.0, 1.0) == pytest.approx(ref, rel=1e-9)


def test_pulse_rejects_bad_duration():
    with pytest.raises(ValidationError):
        wf.HalfCosinePulse(1.0, 0.0)


def test_sampled_average_is_exact_for_piecewise_linear():
    times = np.array([0.0, 0.5, 0.75, 2.0])
    values = np.array([1.0, 3.0, -1.0, 0.0])
    w = wf.Sampled(times, values)
    # exact integral: trapezoid over the knots
    t0, t1 = 0.25, 1.5
    knots = np.array([0.25, 0.5, 0.75, 1.5])
    vals = np.interp(knots, times, values)
    expected = np.trapezoid(vals, knots) / (t1 - t0)
    assert w.average(t0, t1) == pytest.approx(expected, rel=1e-14)
    ref = numeric_average(w, t0, t1)
    assert w.average(t0, t1) == pytest.approx(ref, rel=1e-8)


def test_sampled_l2_is_exact():
    times = np.array([0.0, 1.0, 3.0])
    values = np.array([2.0, 0.0, 1.0])
    w = wf.Sampled(times, values)
    t = np.linspace(0.0, 3.0, 600001)
    ref = np.trapezoid(w(t)**2, t)
    assert w.l2_norm_sq(0.0, 3.0) == pytest.approx(ref, rel=1e-9)


def test_sampled_rejections():
    with pytest.raises(ValidationError):
        wf.Sampled([], [])
    with pytest.raises(ValidationError):
        wf.Sampled([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValidationError):
        wf.Sampled([0.0, 1.0], [1.0])
    w = wf.Sampled([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValidationError):
        w.average(0.5, 1.5)
