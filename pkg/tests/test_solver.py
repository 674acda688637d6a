import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcmwall.assembly import (
    ConstantTemperature,
    Layer,
    LayerStack,
    ProbeSet,
    Sinusoidal,
    hollow_brick_stack,
    daily_sinusoid,
)
from pcmwall.materials import AIR, BRICK, temperature_from_enthalpy
from pcmwall.metrics import compute_metrics, energy_audit
from pcmwall.oracles import periodic_slab
from pcmwall.solver import (
    ConductionSolver,
    SolverConfig,
    SolverError,
    build_grid,
    run,
    step,
)

BRICK_SLAB = LayerStack((Layer(BRICK, 0.05),))
THREE = LayerStack((Layer(BRICK, 0.01), Layer(AIR, 0.03), Layer(BRICK, 0.01)))


def calibration_stack(fill):
    return hollow_brick_stack(0.0065, 0.037, 0.005, fill)


def test_grid_cells_per_layer():
    grid = build_grid(THREE, SolverConfig(cells_per_layer=10))
    assert grid.n_cells == 30 and len(grid.edges) == 31
    assert np.all(grid.widths > 0)


def test_grid_target_dx():
    assert build_grid(BRICK_SLAB, SolverConfig(dx=1e-3)).n_cells == 50


def test_grid_interfaces_are_edges():
    stack = calibration_stack("pux-1500-20")
    grid = build_grid(stack, SolverConfig())
    for x in stack.interfaces:
        assert np.min(np.abs(grid.edges - x)) < 1e-15


def test_grid_refuses_coarse_resolution():
    with pytest.raises(ValueError):
        build_grid(THREE, SolverConfig(dx=0.02))
    with pytest.raises(ValueError):
        build_grid(THREE, SolverConfig(cells_per_layer=0))


def test_equilibrium_is_fixed_point():
    cfg = SolverConfig(cells_per_layer=5)
    bc = ConstantTemperature(15.0)
    grid = build_grid(THREE, cfg)
    solver = ConductionSolver(THREE, bc, cfg, grid)
    state = solver.initial_state(15.0)
    new = step(state, grid, THREE, bc, cfg)
    np.testing.assert_allclose(new.temperature, state.temperature, rtol=0, atol=1e-12)
    np.testing.assert_allclose(new.enthalpy, state.enthalpy, rtol=1e-14)


def test_single_cell_heats_monotonically():
    stack = LayerStack((Layer(BRICK, 0.01),))
    cfg = SolverConfig(cells_per_layer=1, dt=0.05)
    solver = ConductionSolver(stack, ConstantTemperature(50.0), cfg)
    state = solver.initial_state(15.0)
    previous = 15.0
    for _ in range(60):
        state, _ = solver.step(state)
        t = state.temperature[0]
        assert previous < t < 50.0 or t == pytest.approx(50.0)
        previous = t


def test_state_invariant_temperature_matches_enthalpy():
    stack = calibration_stack("pux-1500-20")
    res = run(stack, daily_sinusoid(), ProbeSet(), SolverConfig(), 20.0, 1.0)
    s = res.final_state
    for i, material in enumerate(res.grid.materials):
        t = temperature_from_enthalpy(material, s.enthalpy[i] / material.rho, s.phase(i))
        assert t == pytest.approx(s.temperature[i], abs=1e-9)


def test_brick_slab_matches_periodic_oracle():
    exact = periodic_slab(BRICK_SLAB, 24.0)
    res = run(BRICK_SLAB, daily_sinusoid(), ProbeSet(), SolverConfig(dt=1 / 60, dx=5e-4), 72.0,
              1 / 60)
    last = res.times >= 48.0 - 1e-9
    t, out, inp = res.times[last], res.output[last], res.input_temperature[last]
    w = 2 * np.pi / 24.0
    ratio = (np.sum(out * np.exp(-1j * w * t)) / np.sum(inp * np.exp(-1j * w * t)))
    lag = (-np.angle(ratio) % (2 * np.pi)) / w
    assert abs(ratio) == pytest.approx(exact.decrement_factor, rel=5e-3)
    assert lag == pytest.approx(exact.time_lag, rel=5e-3)


def test_zero_duration_run():
    res = run(BRICK_SLAB, daily_sinusoid(), ProbeSet(), SolverConfig(), 0.0)
    assert res.times.size == 0
    assert np.array_equal(res.final_state.temperature, res.initial_state.temperature)


def test_duration_must_be_whole_steps():
    with pytest.raises(ValueError):
        run(BRICK_SLAB, daily_sinusoid(), ProbeSet(), SolverConfig(dt=0.1), 1.05)


def test_calibration_stack_runs():
    nopcm = run(calibration_stack("air"), daily_sinusoid(), ProbeSet(), SolverConfig(), 30.0, 0.1)
    pcm = run(calibration_stack("pux-1500-20"), daily_sinusoid(), ProbeSet(), SolverConfig(), 30.0, 0.1)
    m0 = compute_metrics(nopcm, 24.0)
    m1 = compute_metrics(pcm, 24.0)
    assert m0.peak_time == pytest.approx(16.5, abs=1.0)
    assert m1.t_out_max <= 38.5
    assert m1.peak_time > m0.peak_time
    assert energy_audit(nopcm) < 1e-4 and energy_audit(pcm) < 1e-4


def test_bitwise_determinism():
    args = (calibration_stack("pux-1500-20"), daily_sinusoid(), ProbeSet(), SolverConfig(), 10.0, 0.1)
    a, b = run(*args), run(*args)
    assert np.array_equal(a.probes, b.probes) and np.array_equal(a.flux, b.flux)


def test_loose_newton_tolerance_increases_residual():
    stack = calibration_stack("pux-1500-20")
    tight = run(stack, daily_sinusoid(), ProbeSet(), SolverConfig(), 24.0, 1.0)
    loose = run(stack, daily_sinusoid(), ProbeSet(), SolverConfig(newton_tolerance=1e-2), 24.0, 1.0)
    assert energy_audit(loose) > energy_audit(tight)


def test_volumetric_source_is_audited():
    cfg = SolverConfig(volumetric_source=500.0, cells_per_layer=20)
    res = run(BRICK_SLAB, ConstantTemperature(20.0), ProbeSet(), cfg, 5.0, 0.5, 20.0)
    assert res.source_energy > 0
    assert energy_audit(res) < 1e-8


def test_contact_resistance_slows_transfer():
    stack = calibration_stack("pux-1500-20")
    base = run(stack, ConstantTemperature(80.0), ProbeSet(), SolverConfig(), 5.0, 1.0, 20.0)
    rc = run(stack, ConstantTemperature(80.0), ProbeSet(),
             SolverConfig(contact_resistance=(0.0, 0.1, 0.1, 0.0)), 5.0, 1.0, 20.0)
    assert rc.output[-1] < base.output[-1]
    with pytest.raises(ValueError):
        run(stack, ConstantTemperature(80.0), ProbeSet(),
            SolverConfig(contact_resistance=(0.1,)), 1.0)


def test_newton_failure_reports_cell():
    stack = calibration_stack("pux-1500-20")
    with pytest.raises(SolverError) as info:
        run(stack, ConstantTemperature(80.0), ProbeSet(), SolverConfig(max_newton_iters=1, dt=0.5), 1.0)
    assert info.value.cell is not None and info.value.residual is not None


@pytest.mark.parametrize("bad", [dict(dt=0.0), dict(newton_tolerance=0.0), dict(max_newton_iters=0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SolverConfig(**bad)


@settings(max_examples=15, deadline=None)
@given(st.floats(-10.0, 60.0), st.floats(-10.0, 60.0), st.floats(0.5, 12.0), st.floats(0.01, 0.5))
def test_maximum_principle_without_pcm(t0, offset, amplitude, dt):
    bc = Sinusoidal(offset, amplitude, 6.0)
    cfg = SolverConfig(dt=dt, cells_per_layer=4)
    solver = ConductionSolver(THREE, bc, cfg)
    state = solver.initial_state(t0)
    lo = min(t0, float(bc.temperature(0.0)))
    hi = max(t0, float(bc.temperature(0.0)))
    for i in range(1, 30):
        state, _ = solver.step(state)
        state.t = i * dt
        b = float(bc.temperature(state.t))
        lo, hi = min(lo, b), max(hi, b)
        assert np.all(state.temperature >= lo - 1e-9) and np.all(state.temperature <= hi + 1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.01, 0.04), st.floats(0.0, 0.2))
def test_energy_conserved_for_random_geometry(cavity, rc):
    stack = hollow_brick_stack((0.05 - cavity) / 2, cavity, 0.005, "pux-1500-20")
    cfg = SolverConfig(dt=0.05, contact_resistance=rc)
    res = run(stack, daily_sinusoid(), ProbeSet(), cfg, 12.0, 0.5)
    assert energy_audit(res) < 1e-4


def test_hysteresis_energy_recorded_for_cycles():
    res = run(calibration_stack("pux-1500-20"), daily_sinusoid(), ProbeSet(), SolverConfig(), 30.0, 1.0)
    assert res.hysteresis_energy != 0.0
    assert dataclasses.is_dataclass(res)
