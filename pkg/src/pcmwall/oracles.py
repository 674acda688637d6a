"""Closed-form references used to verify the solver.

* Steady-periodic conduction through a layered slab with an adiabatic back
  face, by composing 2x2 complex transfer matrices.
* The one-phase Neumann solution of the Stefan melting problem.
* Convergence-order studies of the solver against the above.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erf

from .assembly import ConstantTemperature, Layer, LayerStack, Sinusoidal
from .materials import BRICK, PUX_1500_20, PcmMaterial
from .solver import ConductionSolver, SolverConfig

SECONDS_PER_HOUR = 3600.0


class OracleError(ValueError):
    """The oracle does not apply to the requested configuration."""


# ---------------------------------------------------------------------------
# Periodic slab
# ---------------------------------------------------------------------------

def layer_matrix(layer: Layer, omega: float) -> np.ndarray:
    """Transfer matrix mapping (theta, q) at the far side to the near side.

    ``omega`` is in rad/s.
    """
    mat = layer.material
    if mat.is_pcm:
        raise OracleError(f"no closed form for phase-change layer {mat.name!r}")
    sigma = np.sqrt(1j * omega / mat.diffusivity)
    sl = sigma * layer.thickness
    ks = mat.k * sigma
    return np.array([[np.cosh(sl), np.sinh(sl) / ks],
                     [ks * np.sinh(sl), np.cosh(sl)]])


def compose(matrices: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(2, dtype=complex)
    for m in matrices:
        out = out @ m
    return out


@dataclass(frozen=True)
class PeriodicSlabSolution:
    layers: tuple[Layer, ...]
    period: float  # h
    matrix: np.ndarray  # composed transfer matrix, heated face to back face

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / (self.period * SECONDS_PER_HOUR)

    @property
    def back_face_ratio(self) -> complex:
        """Complex back-face amplitude per unit heated-face amplitude."""
        return 1.0 / self.matrix[0, 0]

    @property
    def decrement_factor(self) -> float:
        return float(abs(self.back_face_ratio))

    @property
    def time_lag(self) -> float:
        """Back-face delay in hours, reduced modulo the period."""
        phase = -np.angle(self.back_face_ratio) % (2.0 * math.pi)
        lag = float(phase / (2.0 * math.pi) * self.period)
        return 0.0 if math.isclose(lag, self.period) else lag

    def response(self, x: float) -> complex:
        """Complex temperature amplitude at depth ``x`` per unit heated-face amplitude."""
        remaining = []
        depth = 0.0
        for layer in self.layers:
            end = depth + layer.thickness
            if x < end:
                part = end - max(x, depth)
                remaining.append(Layer(layer.material, part) if part > 0 else None)
            depth = end
        rest = compose([layer_matrix(l, self.omega) for l in remaining if l is not None])
        return complex(rest[0, 0] / self.matrix[0, 0])

    def amplitude(self, x: float) -> float:
        return abs(self.response(x))

    def phase(self, x: float) -> float:
        """Phase delay (rad) at depth ``x`` relative to the heated face."""
        return float(-np.angle(self.response(x)) % (2.0 * math.pi))


def periodic_slab(stack: LayerStack | Sequence[Layer], period: float) -> PeriodicSlabSolution:
    """Steady-periodic response of a passive slab with an insulated back face.

    An empty layer list is the zero-thickness slab (identity matrix).
    """
    if not period > 0:
        raise OracleError(f"period must be positive, got {period}")
    layers = tuple(stack.layers if isinstance(stack, LayerStack) else stack)
    omega = 2.0 * math.pi / (period * SECONDS_PER_HOUR)
    matrix = compose([layer_matrix(layer, omega) for layer in layers])
    return PeriodicSlabSolution(layers, period, matrix)


# ---------------------------------------------------------------------------
# Stefan problem
# ---------------------------------------------------------------------------

def _neumann_lhs(lam: float) -> float:
    return lam * math.exp(lam * lam) * math.erf(lam)


def stefan_lambda(stefan_number: float) -> float:
    """Root of ``lam * exp(lam**2) * erf(lam) = Ste / sqrt(pi)`` by bisection."""
    if not (math.isfinite(stefan_number) and stefan_number > 0):
        raise OracleError(f"Stefan number must be positive, got {stefan_number}")
    target = stefan_number / math.sqrt(math.pi)
    lo, hi = 0.0, 1.0
    while _neumann_lhs(hi) < target:
        lo, hi = hi, 2.0 * hi
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _neumann_lhs(mid) < target:
            lo = mid
        else:
            hi = mid
    return lo if abs(_neumann_lhs(lo) - target) <= abs(_neumann_lhs(hi) - target) else hi


def stefan_front(lam: float, t: float, alpha: float) -> float:
    """Front position ``2 lam sqrt(alpha t)`` (m) at ``t`` seconds."""
    if t < 0:
        raise OracleError(f"time must be >= 0, got {t}")
    return 2.0 * lam * math.sqrt(alpha * t)


@dataclass(frozen=True)
class StefanSolution:
    """One-phase melting of a solid initially at its melting temperature."""

    lam: float
    alpha: float  # m2/s, melt diffusivity
    t_melt: float  # °C
    t_wall: float  # °C

    @classmethod
    def for_material(cls, material: PcmMaterial, t_wall: float) -> "StefanSolution":
        ste = material.cp_amorphous * (t_wall - material.t_fusion) / material.h_fusion
        alpha = material.k_amorphous / (material.rho * material.cp_amorphous)
        return cls(stefan_lambda(ste), alpha, material.t_fusion, t_wall)

    def front_position(self, t: float) -> float:
        return stefan_front(self.lam, t, self.alpha)

    def time_at(self, position: float) -> float:
        """Seconds until the front reaches ``position``."""
        return (position / (2.0 * self.lam)) ** 2 / self.alpha

    def temperature_profile(self, x, t: float):
        x = np.asarray(x, dtype=float)
        if t <= 0:
            return np.where(x <= 0, self.t_wall, self.t_melt)
        eta = x / (2.0 * math.sqrt(self.alpha * t))
        melt = self.t_wall - (self.t_wall - self.t_melt) * erf(eta) / math.erf(self.lam)
        return np.where(x < self.front_position(t), melt, self.t_melt)


def sharp_pcm(delta_t_transition: float = 0.05) -> PcmMaterial:
    """PUX-like material with a narrow transition window for Stefan checks."""
    return PUX_1500_20.with_updates(name="pux-sharp", delta_t_transition=delta_t_transition)


def melt_front(centers: np.ndarray, fraction: np.ndarray, level: float = 0.5) -> float:
    """Depth of the ``fraction == level`` isoline, linear between cell centres."""
    above = fraction >= level
    if not above[0]:
        return 0.0
    if above.all():
        return float(centers[-1])
    i = int(np.argmin(above)) - 1
    f0, f1 = fraction[i], fraction[i + 1]
    return float(centers[i] + (f0 - level) / (f0 - f1) * (centers[i + 1] - centers[i]))


# ---------------------------------------------------------------------------
# Numerical experiments against the oracles
# ---------------------------------------------------------------------------

def harmonic(times_h, values, period: float) -> complex:
    """Complex fundamental-harmonic amplitude of ``values`` over whole periods.

    Samples must be uniform and span an integer number of periods
    (left-closed, right-open).
    """
    t = np.asarray(times_h, dtype=float) * 2.0 * math.pi / period
    return complex(2.0 * np.mean(np.asarray(values) * np.exp(-1j * t)))


def simulate_periodic_slab(stack: LayerStack, period: float, dx: float, dt_s: float,
                           periods: int = 10, conductivity_scale: float = 1.0):
    """Run the solver on a passive slab under a sinusoid and return (f, lag_h, ratio).

    The amplitude ratio and lag come from the fundamental harmonic of the back
    face over the final period. ``conductivity_scale`` multiplies every
    layer conductivity in the simulated slab only, which lets a harness check
    that the comparison is sensitive to a wrong model.
    """
    if conductivity_scale != 1.0:
        stack = LayerStack(tuple(
            Layer(dataclasses.replace(layer.material, k=layer.material.k * conductivity_scale),
                  layer.thickness) for layer in stack.layers))

    bc = Sinusoidal(offset=32.5, amplitude=17.5, period=period, phase=-math.pi / 2)
    dt_h = dt_s / SECONDS_PER_HOUR
    steps_per_period = int(round(period / dt_h))
    if abs(steps_per_period * dt_h - period) > 1e-9 * period:
        raise OracleError("time step must divide the period")
    cfg = SolverConfig(dt=dt_h, dx=dx)
    solver = ConductionSolver(stack, bc, cfg)
    state = solver.initial_state()
    total = periods * steps_per_period
    out = np.empty(steps_per_period)
    inp = np.empty(steps_per_period)
    times = np.empty(steps_per_period)
    for i in range(1, total + 1):
        state, _ = solver.step(state)
        state.t = i * dt_h
        j = i - (total - steps_per_period) - 1
        if j >= 0:
            times[j] = state.t
            out[j] = state.temperature[-1]
            inp[j] = bc.temperature(state.t)
    ratio = harmonic(times, out, period) / harmonic(times, inp, period)
    lag = (-np.angle(ratio) % (2.0 * math.pi)) / (2.0 * math.pi) * period
    return float(abs(ratio)), float(lag), complex(ratio)


def simulate_stefan(material: PcmMaterial, t_wall: float, length: float, n_cells: int,
                    dt_s: float, t_end: float, sample_times: Sequence[float] = ()):
    """Melt a slab initially at the bottom of its melting window.

    Returns ``(front_at_t_end, {t: front})`` with fronts in metres and times in
    seconds. ``t_end`` must be a whole number of steps.
    """
    stack = LayerStack((Layer(material, length),))
    bc = ConstantTemperature(t_wall)
    dt_h = dt_s / SECONDS_PER_HOUR
    cfg = SolverConfig(dt=dt_h, cells_per_layer=n_cells)
    solver = ConductionSolver(stack, bc, cfg)
    state = solver.initial_state(material.t_fusion - material.delta_t_transition)
    centers = solver.grid.centers
    n_steps = int(round(t_end / dt_s))
    wanted = {int(round(ts / dt_s)): ts for ts in sample_times}
    fronts = {}
    for i in range(1, n_steps + 1):
        state, _ = solver.step(state)
        state.t = i * dt_h
        if i in wanted:
            fronts[wanted[i]] = melt_front(centers, state.liquid_fraction)
    return melt_front(centers, state.liquid_fraction), fronts


@dataclass
class ConvergenceStudy:
    problem: str
    parameter: str  # "space", "time" or "space-time"
    steps: list[float]  # refinement parameter per level, coarse to fine
    values: list[complex | float]  # measured quantity per level
    errors: list[float]  # per-level error measure (successive differences or vs exact)
    orders: list[float]  # observed order between consecutive error pairs
    passed: bool  # False when the error sequence is not monotone

    @property
    def order(self) -> float:
        return self.orders[-1] if self.orders else float("nan")


def _orders(errors: Sequence[float], ratio: float) -> tuple[list[float], bool]:
    monotone = all(b < a for a, b in zip(errors, errors[1:])) and all(e > 0 for e in errors)
    orders = []
    for a, b in zip(errors, errors[1:]):
        orders.append(math.log(a / b) / math.log(ratio) if a > 0 and b > 0 else float("nan"))
    return orders, monotone


def smooth_periodic_stack() -> LayerStack:
    """Homogeneous 50 mm brick slab, the smooth reference problem."""
    return LayerStack((Layer(BRICK, 0.05),))


def convergence_study(problem: str, levels: int = 3) -> ConvergenceStudy:
    """Observed convergence order of the solver.

    ``problem`` is one of ``"periodic-space"``, ``"periodic-time"`` (smooth
    brick slab under a 24 h sinusoid; Richardson differences between
    successive levels refined by 2) or ``"stefan"`` (front position against
    the Neumann solution under simultaneous space and time refinement).
    A non-monotone error sequence yields ``passed = False`` rather than an
    exception.
    """
    if levels < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    if problem == "periodic-space":
        stack = smooth_periodic_stack()
        steps = [0.05 / (5 * 2 ** i) for i in range(levels)]
        values = [simulate_periodic_slab(stack, 24.0, dx, dt_s=300.0, periods=3)[2]
                  for dx in steps]
        errors = [abs(a - b) for a, b in zip(values, values[1:])]
        orders, ok = _orders(errors, 2.0)
        return ConvergenceStudy(problem, "space", steps, values, errors, orders, ok)
    if problem == "periodic-time":
        stack = smooth_periodic_stack()
        steps = [1800.0 / 2 ** i for i in range(levels)]
        values = [simulate_periodic_slab(stack, 24.0, 0.0025, dt_s=dt, periods=3)[2]
                  for dt in steps]
        errors = [abs(a - b) for a, b in zip(values, values[1:])]
        orders, ok = _orders(errors, 2.0)
        return ConvergenceStudy(problem, "time", steps, values, errors, orders, ok)
    if problem == "stefan":
        material = sharp_pcm()
        t_wall = material.t_fusion + 20.0
        exact = StefanSolution.for_material(material, t_wall)
        length = 0.02
        t_end = exact.time_at(length / 2)
        sample_times = np.linspace(0.25, 1.0, 16) * t_end
        n0 = 25
        steps, values, errors = [], [], []
        for i in range(levels):
            n = n0 * 2 ** i
            n_steps = 40 * 2 ** i
            dt = t_end / n_steps
            _, fronts = simulate_stefan(material, t_wall, length, n, dt, t_end,
                                        sample_times=[round(s / dt) * dt for s in sample_times])
            err = [abs(s - exact.front_position(t)) for t, s in fronts.items()]
            steps.append(length / n)
            values.append(fronts[max(fronts)])
            errors.append(float(np.sqrt(np.mean(np.square(err)))))
        orders, ok = _orders(errors, 2.0)
        return ConvergenceStudy(problem, "space-time", steps, values, errors, orders, ok)
    raise ValueError(f"unknown convergence problem {problem!r}")
