"""Finite-volume conduction solver in enthalpy form.

Cells are cell-centred and aligned with layer interfaces. Each time step is
one backward-Euler step of the volumetric enthalpy ``E = rho * H``::

    dx_i (E_i^{n+1} - E_i^n) / dt = q_{i-1/2} - q_{i+1/2} + Q dx_i

with face fluxes from harmonic-mean conductances, a Dirichlet heated face
through a half-cell ghost flux and a zero-flux output face. The nonlinear
system is solved by Newton iteration on ``E`` with ``dT/dE = 1/(rho c_app)``.
PCM hysteresis branches are frozen inside a step and advanced afterwards.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from .assembly import (
    BoundaryCondition,
    LayerStack,
    ProbeSet,
    default_initial_temperature,
    input_temperature,
    probe_locations,
)
from .materials import Branch, BranchCurves, MaterialTable, PhaseState

log = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600.0
MAX_HALVINGS = 10
# A cell may flip branch at most this many times while a step is re-solved.
MAX_BRANCH_PASSES = 3


class SolverError(RuntimeError):
    """Newton iteration failed even after repeated step halving."""

    def __init__(self, message, cell=None, residual=None):
        super().__init__(message)
        self.cell = cell
        self.residual = residual


class _NewtonFailure(Exception):
    def __init__(self, cell, residual):
        super().__init__(cell, residual)
        self.cell = cell
        self.residual = residual


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1.0 / 60.0  # h
    newton_tolerance: float = 1e-10
    max_newton_iters: int = 50
    cells_per_layer: int | None = None
    dx: float = 5e-4  # target cell width (m), used when cells_per_layer is None
    volumetric_source: float = 0.0  # W/m3
    # m2 K/W, one value for every internal interface or one per interface.
    contact_resistance: float | tuple[float, ...] = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.newton_tolerance > 0:
            raise ValueError(f"newton_tolerance must be positive, got {self.newton_tolerance}")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")
        if self.cells_per_layer is None and not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        if isinstance(self.contact_resistance, (list, tuple)):
            object.__setattr__(self, "contact_resistance", tuple(self.contact_resistance))


@dataclass(frozen=True)
class Grid:
    edges: np.ndarray
    layer_index: np.ndarray
    materials: tuple

    @property
    def n_cells(self) -> int:
        return len(self.edges) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def build_grid(stack: LayerStack, config: SolverConfig) -> Grid:
    """Uniform subdivision of every layer; layer interfaces are always cell edges."""
    edges = [0.0]
    layer_index = []
    materials = []
    x0 = 0.0
    for j, layer in enumerate(stack.layers):
        if config.cells_per_layer is not None:
            n = int(config.cells_per_layer)
            if n < 1:
                raise ValueError("cells_per_layer must be >= 1")
        else:
            if config.dx > layer.thickness * (1 + 1e-9):
                raise ValueError(
                    f"dx = {config.dx} m is coarser than layer {j} ({layer.thickness} m)")
            n = max(1, math.ceil(layer.thickness / config.dx - 1e-9))
        x1 = x0 + layer.thickness
        inner = np.linspace(x0, x1, n + 1)[1:]
        inner[-1] = x1
        edges.extend(inner.tolist())
        layer_index.extend([j] * n)
        materials.extend([layer.material] * n)
        x0 = x1
    return Grid(np.array(edges), np.array(layer_index), tuple(materials))


@dataclass
class SimulationState:
    t: float  # h
    temperature: np.ndarray  # °C per cell
    enthalpy: np.ndarray  # J/m3 per cell
    heating: np.ndarray  # branch per cell, True = heating (ignored for non-PCM cells)
    liquid_fraction: np.ndarray  # 0 for non-PCM cells
    pcm: np.ndarray  # mask of PCM cells

    def phase(self, i: int) -> PhaseState | None:
        if not self.pcm[i]:
            return None
        branch = Branch.HEATING if self.heating[i] else Branch.COOLING
        return PhaseState(branch, float(self.liquid_fraction[i]))

    def copy(self) -> "SimulationState":
        return SimulationState(self.t, self.temperature.copy(), self.enthalpy.copy(),
                               self.heating.copy(), self.liquid_fraction.copy(), self.pcm.copy())


@dataclass
class StepRecord:
    """Bookkeeping for one accepted (sub)step."""

    t: float  # h, end of step
    dt: float  # h
    flux: float  # W/m2 into the heated face, implicit (end of step)
    hysteresis_energy: float  # J/m2 added by branch re-anchoring
    newton_iters: int


class ConductionSolver:
    """Reusable solver for one stack, boundary condition and configuration."""

    def __init__(self, stack: LayerStack, bc: BoundaryCondition, config: SolverConfig,
                 grid: Grid | None = None):
        self.stack = stack
        self.bc = bc
        self.config = config
        self.grid = grid if grid is not None else build_grid(stack, config)
        self.table = MaterialTable(self.grid.materials)
        self.dx = self.grid.widths
        self.rho = self.table.rho
        self.n = self.grid.n_cells
        self.has_pcm = bool(self.table.is_pcm.any())
        self.face_resistance = self._contact_resistances()
        if not self.has_pcm:
            self._g_fixed = self._conductances(np.zeros(self.n))

    def _contact_resistances(self) -> np.ndarray:
        """Extra resistance per internal face (length n - 1)."""
        r = np.zeros(max(self.n - 1, 0))
        li = self.grid.layer_index
        interface_faces = np.nonzero(li[1:] != li[:-1])[0]
        cr = self.config.contact_resistance
        if isinstance(cr, tuple):
            if len(cr) != len(interface_faces):
                raise ValueError(f"contact_resistance needs {len(interface_faces)} values, "
                                 f"got {len(cr)}")
            r[interface_faces] = cr
        else:
            r[interface_faces] = cr
        if np.any(r < 0):
            raise ValueError("contact resistance must be >= 0")
        return r

    def _conductances(self, fraction) -> np.ndarray:
        """Face conductances (W/(m2 K)) for faces 0..n; the last face is adiabatic."""
        k = self.table.conductivity(fraction)
        half = 0.5 * self.dx / k
        g = np.zeros(self.n + 1)
        g[0] = 1.0 / half[0]
        g[1:-1] = 1.0 / (half[:-1] + self.face_resistance + half[1:])
        return g

    # -- state construction --------------------------------------------------

    def initial_state(self, temperature: float | Sequence[float] | None = None,
                      t0: float = 0.0) -> SimulationState:
        if temperature is None:
            temperature = default_initial_temperature(self.bc)
        temp = np.broadcast_to(np.asarray(temperature, dtype=float), (self.n,)).copy()
        heating = np.ones(self.n, dtype=bool)
        fraction = np.where(self.table.is_pcm,
                            self.table.ramp(heating, temp), 0.0)
        fraction = np.where(self.table.is_pcm, fraction, 0.0)
        curves = BranchCurves(self.table, heating, fraction)
        energy = self.rho * curves.enthalpy(temp)
        return SimulationState(t0, temp, energy, heating, fraction, self.table.is_pcm.copy())

    def total_energy(self, state: SimulationState) -> float:
        """Stored enthalpy per unit face area, J/m2 (0 °C reference)."""
        return math.fsum(state.enthalpy * self.dx)

    def face_flux(self, state: SimulationState) -> float:
        """Conductive flux into the heated face (W/m2) for ``state``."""
        g0 = 2.0 * self.table.conductivity(state.liquid_fraction[:1])[0] / self.dx[0]
        t_bc = input_temperature(self.bc, state.t)
        return g0 * (t_bc - state.temperature[0])

    # -- Newton kernel ----------------------------------------------------------

    def _newton(self, e_old, t_guess, curves, g, t_bc, dt_s):
        cfg = self.config
        m = self.dx / dt_s
        rhs = self.config.volumetric_source * self.dx
        rhs = rhs.copy() if np.ndim(rhs) else np.full(self.n, rhs)
        rhs[0] += g[0] * t_bc
        gl = g[:-1]
        gr = g[1:]
        scale = np.maximum(np.abs(e_old), self.rho * curves.cp_s)

        def residual(e, t):
            kt = (gl + gr) * t
            kt[1:] -= gl[1:] * t[:-1]
            kt[:-1] -= gr[:-1] * t[1:]
            return m * (e - e_old) + kt - rhs

        e = e_old.copy()
        t = t_guess.copy()
        r = residual(e, t)
        ab = np.zeros((3, self.n))
        for it in range(1, cfg.max_newton_iters + 1):
            d = 1.0 / (self.rho * curves.capacity(t))
            ab[1] = m + (gl + gr) * d
            ab[0, 1:] = -gr[:-1] * d[1:]
            ab[2, :-1] = -gl[1:] * d[:-1]
            delta = solve_banded((1, 1), ab, -r, overwrite_b=True, check_finite=False)
            if not self.has_pcm:
                e = e + delta
                return e, curves.temperature(e / self.rho), it
            norm0 = np.max(np.abs(r) / (m * scale))
            lam = 1.0
            for _ in range(30):
                e_try = e + lam * delta
                t_try = curves.temperature(e_try / self.rho)
                r_try = residual(e_try, t_try)
                if np.max(np.abs(r_try) / (m * scale)) <= norm0 or lam < 1e-6:
                    break
                lam *= 0.5
            e, t, r = e_try, t_try, r_try
            if np.max(np.abs(lam * delta) / scale) < cfg.newton_tolerance:
                return e, t, it
        worst = int(np.argmax(np.abs(r) / (m * scale)))
        raise _NewtonFailure(worst, float(r[worst]))

    # -- time stepping ---------------------------------------------------------

    def _advance(self, state: SimulationState, dt_h: float) -> tuple[SimulationState, StepRecord]:
        dt_s = dt_h * SECONDS_PER_HOUR
        t_new_clock = state.t + dt_h
        t_bc = float(input_temperature(self.bc, t_new_clock))
        table = self.table
        heating = state.heating.copy()
        fraction = state.liquid_fraction
        e_start = state.enthalpy.copy()
        t_old = state.temperature
        g = self._g_fixed if not self.has_pcm else self._conductances(fraction)
        hysteresis = 0.0
        locked = np.zeros(self.n, dtype=bool)
        iters = 0
        for _ in range(MAX_BRANCH_PASSES):
            curves = BranchCurves(table, heating, fraction)
            e_new, t_new, k = self._newton(e_start, t_old, curves, g, t_bc, dt_s)
            iters += k
            if not self.has_pcm:
                break
            up = t_new > t_old
            down = t_new < t_old
            flip = table.is_pcm & ~locked & ((up & ~heating) | (down & heating))
            if not flip.any():
                break
            # Switch branch at the start of the step, keeping (T, phi) fixed.
            heating = np.where(flip, ~heating, heating)
            locked |= flip
            switched = BranchCurves(table, heating, fraction)
            e_switched = np.where(flip, self.rho * switched.enthalpy(t_old), e_start)
            hysteresis += math.fsum((e_switched - e_start) * self.dx)
            e_start = e_switched

        if self.has_pcm:
            new_heating, new_fraction = table.update_phase(heating, fraction, t_old, t_new)
            new_curves = BranchCurves(table, new_heating, new_fraction)
            changed = table.is_pcm & (new_heating != heating)
            if changed.any():
                e_anchor = np.where(changed, self.rho * new_curves.enthalpy(t_new), e_new)
                hysteresis += math.fsum((e_anchor - e_new) * self.dx)
                e_new = e_anchor
            t_new = np.where(changed, t_new, new_curves.temperature(e_new / self.rho))
        else:
            new_heating, new_fraction = heating, fraction

        flux = g[0] * (t_bc - t_new[0])
        new_state = SimulationState(t_new_clock, t_new, e_new, new_heating, new_fraction,
                                    state.pcm)
        return new_state, StepRecord(t_new_clock, dt_h, float(flux), hysteresis, iters)

    def _advance_with_halving(self, state, dt_h, depth=0):
        try:
            new_state, rec = self._advance(state, dt_h)
            return new_state, [rec]
        except _NewtonFailure as exc:
            if depth >= MAX_HALVINGS:
                raise SolverError(
                    f"Newton iteration did not converge at t = {state.t + dt_h:.6g} h "
                    f"after {MAX_HALVINGS} step halvings; worst cell {exc.cell}, "
                    f"residual {exc.residual:.3e}", cell=exc.cell, residual=exc.residual,
                ) from None
            log.debug("halving step at t=%g h (depth %d)", state.t, depth + 1)
            mid, recs_a = self._advance_with_halving(state, dt_h / 2, depth + 1)
            end, recs_b = self._advance_with_halving(mid, dt_h / 2, depth + 1)
            return end, recs_a + recs_b

    def step(self, state: SimulationState, dt_h: float | None = None):
        """One time step (with automatic halving). Returns ``(state, records)``."""
        return self._advance_with_halving(state, self.config.dt if dt_h is None else dt_h)

    def probe_temperatures(self, state: SimulationState, positions: Sequence[float]) -> np.ndarray:
        """Linear interpolation between cell centres.

        The heated face takes the boundary value and the adiabatic face the
        last cell value.
        """
        xs = np.concatenate(([0.0], self.grid.centers))
        ts = np.concatenate(([float(input_temperature(self.bc, state.t))], state.temperature))
        return np.interp(np.asarray(positions, dtype=float), xs, ts)


def step(state: SimulationState, grid: Grid, stack: LayerStack, bc: BoundaryCondition,
         config: SolverConfig) -> SimulationState:
    """Advance ``state`` by ``config.dt``."""
    solver = ConductionSolver(stack, bc, config, grid=grid)
    new_state, _ = solver.step(state)
    return new_state


@dataclass
class RunResult:
    times: np.ndarray  # h, output samples (including t = 0)
    input_temperature: np.ndarray
    probe_positions: tuple[float, ...]  # fractional depths
    probe_x: np.ndarray  # m
    probes: np.ndarray  # shape (n_samples, n_probes), °C
    flux: np.ndarray  # W/m2 at output samples
    step_times: np.ndarray  # h, end of every accepted substep
    step_dt: np.ndarray  # h
    step_flux: np.ndarray  # W/m2
    initial_state: SimulationState
    final_state: SimulationState
    initial_energy: float  # J/m2
    final_energy: float  # J/m2
    source_energy: float  # J/m2 injected by the volumetric source
    hysteresis_energy: float  # J/m2 from branch re-anchoring
    grid: Grid = field(repr=False)
    stack: LayerStack = field(repr=False)
    period: float | None = None

    @property
    def boundary_energy(self) -> float:
        """Time integral of the heated-face flux, J/m2."""
        return math.fsum(self.step_flux * self.step_dt * SECONDS_PER_HOUR)

    def probe(self, position: float) -> np.ndarray:
        idx = self.probe_positions.index(position)
        return self.probes[:, idx]

    @property
    def output(self) -> np.ndarray:
        """Temperature series at the deepest probe (the output face by default)."""
        return self.probes[:, -1]


def run(stack: LayerStack, bc: BoundaryCondition, probes: ProbeSet | Sequence[float],
        config: SolverConfig, duration: float, output_interval: float | None = None,
        initial_temperature: float | None = None, on_step=None) -> RunResult:
    """Integrate for ``duration`` hours, sampling probes every ``output_interval``.

    ``output_interval`` defaults to the time step and must be a whole number
    of steps. ``on_step(solver, state)`` is called after every full step.
    """
    if not duration >= 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    if not isinstance(probes, ProbeSet):
        probes = ProbeSet(tuple(probes))
    solver = ConductionSolver(stack, bc, config)
    dt = config.dt
    n_steps = int(round(duration / dt))
    if abs(n_steps * dt - duration) > 1e-9 * max(duration, 1.0):
        raise ValueError(f"duration {duration} h is not a whole number of {dt} h steps")
    interval = dt if output_interval is None else output_interval
    stride = int(round(interval / dt))
    if stride < 1 or abs(stride * dt - interval) > 1e-9 * max(interval, 1.0):
        raise ValueError(f"output interval {interval} h is not a whole number of {dt} h steps")

    positions = probes.positions
    xs = np.array(probe_locations(stack, probes))
    state = solver.initial_state(initial_temperature)
    initial = state.copy()
    initial_energy = solver.total_energy(state)

    times, inputs, samples, fluxes = [], [], [], []
    step_times, step_dts, step_flux = [], [], []
    hysteresis = 0.0

    def sample(s):
        times.append(s.t)
        inputs.append(float(input_temperature(bc, s.t)))
        samples.append(solver.probe_temperatures(s, xs))
        fluxes.append(solver.face_flux(s))

    if n_steps > 0:
        sample(state)
    for i in range(1, n_steps + 1):
        state, records = solver.step(state)
        # Pin the clock to the nominal grid so sampling never drifts.
        state.t = i * dt
        for rec in records:
            step_times.append(rec.t)
            step_dts.append(rec.dt)
            step_flux.append(rec.flux)
            hysteresis += rec.hysteresis_energy
        if on_step is not None:
            on_step(solver, state)
        if i % stride == 0:
            sample(state)

    source_energy = config.volumetric_source * stack.total_thickness * duration * SECONDS_PER_HOUR
    n_probes = len(positions)
    return RunResult(
        times=np.array(times),
        input_temperature=np.array(inputs),
        probe_positions=positions,
        probe_x=xs,
        probes=np.array(samples).reshape(-1, n_probes),
        flux=np.array(fluxes),
        step_times=np.array(step_times),
        step_dt=np.array(step_dts),
        step_flux=np.array(step_flux),
        initial_state=initial,
        final_state=state,
        initial_energy=initial_energy,
        final_energy=solver.total_energy(state),
        source_energy=source_energy,
        hysteresis_energy=hysteresis,
        grid=solver.grid,
        stack=stack,
        period=getattr(bc, "period", None),
    )
