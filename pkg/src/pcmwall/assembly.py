"""Layered wall assemblies, heated-face boundary conditions and probes.

Depth ``x`` runs from the heated face (x = 0) to the insulated output face
(x = L). Times are in hours, temperatures in °C, lengths in metres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .materials import AnyMaterial, get_material


class AssemblyError(ValueError):
    """Invalid geometry, boundary condition or probe definition."""


@dataclass(frozen=True)
class Layer:
    material: AnyMaterial
    thickness: float  # m

    def __post_init__(self):
        if not (math.isfinite(self.thickness) and self.thickness > 0):
            raise AssemblyError(f"layer thickness must be positive, got {self.thickness}")


@dataclass(frozen=True)
class LayerStack:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise AssemblyError("a layer stack needs at least one layer")

    @property
    def total_thickness(self) -> float:
        return math.fsum(layer.thickness for layer in self.layers)

    @property
    def interfaces(self) -> list[float]:
        """Depths of all layer boundaries, including both faces."""
        edges = [0.0]
        for layer in self.layers:
            edges.append(edges[-1] + layer.thickness)
        return edges

    @property
    def has_pcm(self) -> bool:
        return any(layer.material.is_pcm for layer in self.layers)

    def __len__(self):
        return len(self.layers)


def hollow_brick_stack(shell_thickness: float, cavity_thickness: float, skin_thickness: float,
                       fill: str | AnyMaterial, *, shell: str | AnyMaterial = "brick",
                       skin: str | AnyMaterial = "cement",
                       materials: dict[str, AnyMaterial] | None = None) -> LayerStack:
    """Build ``skin | shell | fill | shell | skin``, dropping zero-thickness layers.

    Material arguments are ids resolved through ``materials`` and the built-in
    library, or material objects.
    """
    for name, value in (("shell_thickness", shell_thickness),
                        ("cavity_thickness", cavity_thickness),
                        ("skin_thickness", skin_thickness)):
        if not (math.isfinite(value) and value >= 0):
            raise AssemblyError(f"{name} must be >= 0, got {value}")

    def resolve(m):
        return get_material(m, materials) if isinstance(m, str) else m

    parts = [(skin, skin_thickness), (shell, shell_thickness), (fill, cavity_thickness),
             (shell, shell_thickness), (skin, skin_thickness)]
    layers = [Layer(resolve(m), t) for m, t in parts if t > 0]
    if not layers:
        raise AssemblyError("hollow brick has zero total thickness")
    # Adjacent identical layers (e.g. a solid brick) merge into one slab.
    merged: list[Layer] = []
    for layer in layers:
        if merged and merged[-1].material == layer.material:
            merged[-1] = Layer(layer.material, merged[-1].thickness + layer.thickness)
        else:
            merged.append(layer)
    return LayerStack(tuple(merged))


# ---------------------------------------------------------------------------
# Boundary conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantTemperature:
    """Heated face held at ``value`` for ``duration`` hours, then at ``then_ambient``."""

    value: float
    duration: float = math.inf
    then_ambient: float = 20.0

    def __post_init__(self):
        if not self.duration >= 0:
            raise AssemblyError(f"duration must be >= 0, got {self.duration}")

    def temperature(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= self.duration, self.value, self.then_ambient)


@dataclass(frozen=True)
class Sinusoidal:
    offset: float
    amplitude: float
    period: float  # h
    phase: float = 0.0  # rad

    def __post_init__(self):
        if not (math.isfinite(self.period) and self.period > 0):
            raise AssemblyError(f"period must be positive, got {self.period}")

    def temperature(self, t):
        t = np.asarray(t, dtype=float)
        # Reducing t modulo the period keeps the signal exactly periodic.
        return self.offset + self.amplitude * np.sin(
            2.0 * np.pi * (np.mod(t, self.period) / self.period) + self.phase)


@dataclass(frozen=True)
class TimeSeries:
    """Piecewise-linear samples ``(t_h, T_C)``; the last value is held."""

    samples: tuple[tuple[float, float], ...]

    def __post_init__(self):
        samples = tuple((float(t), float(v)) for t, v in self.samples)
        object.__setattr__(self, "samples", samples)
        if not samples:
            raise AssemblyError("time series needs at least one sample")
        times = [s[0] for s in samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise AssemblyError("time series samples must be strictly increasing in time")

    def temperature(self, t):
        t = np.asarray(t, dtype=float)
        times = np.array([s[0] for s in self.samples])
        values = np.array([s[1] for s in self.samples])
        if np.any(t < times[0]):
            raise AssemblyError(f"time before first sample ({times[0]} h)")
        return np.interp(t, times, values)


BoundaryCondition = Union[ConstantTemperature, Sinusoidal, TimeSeries]


def daily_sinusoid() -> Sinusoidal:
    """Daily exterior-surface cycle between 15 °C (t = 0 h) and 50 °C (t = 12 h)."""
    return Sinusoidal(offset=32.5, amplitude=17.5, period=24.0, phase=-math.pi / 2)


def input_temperature(bc: BoundaryCondition, t):
    """Heated-face temperature at time ``t`` (h); scalar in, float out."""
    if np.any(np.asarray(t) < 0):
        raise AssemblyError(f"time must be >= 0, got {t}")
    value = bc.temperature(t)
    return float(value) if np.ndim(value) == 0 else value


def default_initial_temperature(bc: BoundaryCondition) -> float:
    """Uniform starting temperature used when a scenario does not set one.

    A step heating test starts at the ambient it later returns to; every
    other forcing starts at its own value at t = 0.
    """
    if isinstance(bc, ConstantTemperature):
        return bc.then_ambient
    return input_temperature(bc, 0.0)


# ---------------------------------------------------------------------------
# Probes
# ---------------------------------------------------------------------------

DEFAULT_PROBES = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class ProbeSet:
    positions: tuple[float, ...] = DEFAULT_PROBES

    def __post_init__(self):
        pos = tuple(float(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if any(not (0.0 <= p <= 1.0) for p in pos):
            raise AssemblyError(f"probe positions must lie in [0, 1], got {pos}")
        if any(b < a for a, b in zip(pos, pos[1:])):
            raise AssemblyError(f"probe positions must be sorted, got {pos}")


def probe_locations(stack: LayerStack, probes: ProbeSet | Sequence[float]) -> list[float]:
    if not isinstance(probes, ProbeSet):
        probes = ProbeSet(tuple(probes))
    total = stack.total_thickness
    return [p * total for p in probes.positions]
