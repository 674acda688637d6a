import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcmwall.assembly import ConstantTemperature, Layer, LayerStack, ProbeSet, daily_sinusoid
from pcmwall.materials import BRICK
from pcmwall.metrics import (
    Extrema,
    MetricError,
    compute_metrics,
    cycle_convergence,
    decrement_factor,
    energy_audit,
    energy_mismatch,
    extrema,
    output_metrics,
    rate_minima,
    storage_capacity,
    time_lag,
)
from pcmwall.solver import SolverConfig, run

TIMES = np.arange(241) * 0.1
SLAB = LayerStack((Layer(BRICK, 0.05),))


def sinus(t):
    return np.asarray(daily_sinusoid().temperature(t))


def test_sinusoid_extrema_at_boundary_and_peak():
    ext = extrema(TIMES, sinus(TIMES), (0.0, 24.0))
    assert ext.max == pytest.approx(50.0, abs=1e-12) and ext.t_max == pytest.approx(12.0, abs=1e-9)
    assert ext.min == 15.0 and ext.t_min == 0.0


def test_constant_series_ties_to_window_start():
    ext = extrema(TIMES, np.full_like(TIMES, 3.0), (2.0, 10.0))
    assert ext == Extrema(3.0, 2.0, 3.0, 2.0)


def test_parabolic_refinement_recovers_off_grid_peak():
    t = np.arange(0.0, 10.0, 0.5)
    y = -(t - 4.3) ** 2
    ext = extrema(t, y)
    assert ext.t_max == pytest.approx(4.3, abs=1e-12)
    assert ext.max == pytest.approx(0.0, abs=1e-12)


def test_empty_window_is_error():
    with pytest.raises(MetricError):
        extrema(TIMES, sinus(TIMES), (30.0, 40.0))


@pytest.mark.parametrize("out, inp, expected", [
    ((38.75, 25.0), (50.0, 15.0), 0.393),
    ((37.88, 24.4), (50.0, 15.0), 0.385),
    ((50.0, 15.0), (50.0, 15.0), 1.0),
])
def test_decrement_factor_examples(out, inp, expected):
    f = decrement_factor(Extrema(out[0], 0, out[1], 0), Extrema(inp[0], 0, inp[1], 0))
    assert f == pytest.approx(expected, abs=5e-4)


def test_decrement_factor_zero_swing():
    with pytest.raises(MetricError):
        decrement_factor(Extrema(1, 0, 0, 0), Extrema(5, 0, 5, 0))


@pytest.mark.parametrize("a, b, expected", [(12, 16.5, 4.5), (12, 19, 7.0), (12, 12, 0.0), (20, 2, 6.0)])
def test_time_lag_examples(a, b, expected):
    assert time_lag(a, b, 24.0) == pytest.approx(expected)


@settings(max_examples=300)
@given(st.floats(0, 100), st.floats(0, 100), st.floats(0.5, 48))
def test_time_lag_antisymmetry(a, b, period):
    total = time_lag(a, b, period) + time_lag(b, a, period)
    assert min(abs(total), abs(total - period)) < 1e-9
    assert 0 <= time_lag(a, b, period) < period


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), st.floats(0.1, 0.9), st.floats(0.5, 6.0))
def test_decrement_factor_shift_invariance(c, gain, delay):
    t = np.arange(481) * 0.1
    inp = sinus(t)
    out = 32.5 + gain * (sinus(t - delay + 24.0) - 32.5)
    f0, lag0, _, _ = output_metrics(t, inp, out, 24.0)
    f1, _, _, _ = output_metrics(t, inp + c, out + c, 24.0)
    assert f1 == pytest.approx(f0, rel=1e-9)
    assert f0 == pytest.approx(gain, rel=1e-3)
    assert lag0 == pytest.approx(delay, abs=1e-3)


def test_decrement_factor_shift_in_time():
    # shifting both series by whole samples leaves f unchanged
    t = np.arange(481) * 0.1
    inp, out = sinus(t), 30 + 0.4 * (sinus(t - 3.0 + 24.0) - 32.5)
    f0 = output_metrics(t, inp, out, 24.0, (0.0, 24.0))[0]
    f1 = output_metrics(t, sinus(t + 2.0), 30 + 0.4 * (sinus(t - 1.0 + 24.0) - 32.5), 24.0, (0.0, 24.0))[0]
    assert f1 == pytest.approx(f0, rel=1e-6)


def test_self_and_constant_decrement():
    inp = sinus(TIMES)
    assert output_metrics(TIMES, inp, inp, 24.0)[0] == pytest.approx(1.0)
    assert output_metrics(TIMES, inp, np.full_like(inp, 20.0), 24.0)[0] == 0.0


def test_cycle_convergence_of_input_itself():
    t = np.arange(481) * 0.1
    assert cycle_convergence(t, sinus(t), 24.0, 1e-9)


def test_cycle_convergence_needs_two_periods():
    with pytest.raises(MetricError):
        cycle_convergence(TIMES, sinus(TIMES), 24.0, 0.01)


def test_cycle_convergence_brick_slab():
    cfg = SolverConfig(dt=0.05, dx=1e-3)
    short = run(SLAB, daily_sinusoid(), ProbeSet(), cfg, 48.0, 0.1)
    long = run(SLAB, daily_sinusoid(), ProbeSet(), cfg, 240.0, 0.1)
    assert not cycle_convergence(short.times, short.probes, 24.0, 0.01)
    assert cycle_convergence(long.times, long.probes, 24.0, 0.01)
    report = compute_metrics(long, 24.0, require_converged=True)
    assert report.cycle_converged


def test_require_converged_raises_on_transient():
    res = run(SLAB, daily_sinusoid(), ProbeSet(), SolverConfig(dt=0.05, dx=1e-3), 48.0, 0.1)
    with pytest.raises(MetricError):
        compute_metrics(res, 24.0, require_converged=True)


def test_equilibrium_audit_and_convergence():
    res = run(SLAB, ConstantTemperature(20.0), ProbeSet(), SolverConfig(dt=0.1, dx=1e-3), 48.0, 0.1, 20.0)
    assert abs(energy_mismatch(res)) <= 1e-10 * res.initial_energy
    assert energy_audit(res) < 1e-4
    assert cycle_convergence(res.times, res.probes, 24.0, 0.01)


def test_report_record_fields():
    res = run(SLAB, daily_sinusoid(), ProbeSet(), SolverConfig(dt=0.1, dx=1e-3), 30.0, 0.1)
    record = compute_metrics(res, 24.0).as_record()
    for key in ("decrement_factor", "time_lag", "t_out_max", "t_out_min", "peak_time",
                "valley_time", "energy_residual", "cycle_converged"):
        assert key in record
    assert record["decrement_factor"] >= 0 and record["time_lag"] >= 0


def test_storage_capacity():
    assert storage_capacity(SLAB, 15.0, 50.0) == pytest.approx(0.05 * 2300 * 920 * 35)


def test_rate_minima_finds_slowdown():
    t = np.linspace(0, 10, 1001)
    y = 20 + 3 * t - 2 * np.exp(-((t - 5) ** 2))  # rate dips near t = 5
    found = rate_minima(t, y, (30.0, 40.0))
    assert found and 4.0 < found[0][0] < 5.5
    assert rate_minima(t, 20 + 3 * t, (0, 100)) == []
