"""Thermophysical material models.

Plain conductors carry constant ``k``, ``rho`` and ``cp``. The phase-change
material carries per-phase constants plus a heating (melting) and a cooling
(crystallization) transition window. Latent heat is smeared uniformly over a
window of width ``2 * delta_t_transition`` centred on the branch transition
temperature, which makes the specific enthalpy piecewise quadratic in
temperature and invertible in closed form.

Enthalpy is measured from 0 °C for every material so that energy audits can
mix materials freely.

For a PCM at temperature ``T`` with amorphous fraction ``phi`` on branch ``b``::

    H(T) = cp_s * T + phi * ell_b(T)
    ell_b(T) = L_b + (cp_l - cp_s) * (T - T_b)

``ell_b`` is the amorphous-minus-crystalline enthalpy gap, anchored so that it
equals the branch latent heat ``L_b`` at the branch centre ``T_b``. Along a
branch ``dH/dT`` equals the mixture heat capacity plus ``ell_b(T) / (2 dT)``
inside the window, and the integral across a full window is exactly ``L_b``
plus the sensible part. Switching branch at fixed ``(T, phi)`` moves H by
``phi * (ell_c - ell_h)``, a constant per unit fraction; this is the model's
cycle non-closure and is accounted for separately by the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Union

import numpy as np

# Admissible temperature span for inverse lookups, °C.
T_RANGE = (-50.0, 150.0)


class MaterialError(ValueError):
    """Invalid material definition or evaluation input."""


class EnthalpyRangeError(ValueError):
    """Enthalpy outside the image of the branch curve over ``T_RANGE``."""


class Branch(Enum):
    HEATING = "heating"
    COOLING = "cooling"


@dataclass(frozen=True)
class PhaseState:
    """Hysteresis state of one PCM cell.

    ``liquid_fraction`` is the fraction in the amorphous (high temperature)
    phase. The PCM starts fully semi-crystalline on the heating branch.
    """

    branch: Branch = Branch.HEATING
    liquid_fraction: float = 0.0

    def __post_init__(self):
        if not isinstance(self.branch, Branch):
            raise MaterialError(f"branch must be a Branch, got {self.branch!r}")
        if not (0.0 <= self.liquid_fraction <= 1.0):
            raise MaterialError(f"liquid_fraction {self.liquid_fraction} outside [0, 1]")


@dataclass(frozen=True)
class Material:
    """Conductor with temperature-independent properties."""

    name: str
    k: float  # W/(m K)
    rho: float  # kg/m3
    cp: float  # J/(kg K)

    def __post_init__(self):
        for field in ("k", "rho", "cp"):
            value = getattr(self, field)
            if not (math.isfinite(value) and value > 0):
                raise MaterialError(f"{self.name}: {field} must be positive, got {value}")

    @property
    def is_pcm(self) -> bool:
        return False

    @property
    def diffusivity(self) -> float:
        return self.k / (self.rho * self.cp)


@dataclass(frozen=True)
class PcmMaterial:
    """Solid-solid phase-change material with melting/crystallization hysteresis."""

    name: str
    k_semicrystalline: float  # W/(m K)
    k_amorphous: float  # W/(m K)
    rho: float  # kg/m3
    cp_semicrystalline: float  # J/(kg K)
    cp_amorphous: float  # J/(kg K)
    t_fusion: float  # °C
    t_crystallization: float  # °C
    h_fusion: float  # J/kg
    h_crystallization: float  # J/kg
    delta_t_transition: float = 2.0  # K, half-width of the smearing window

    def __post_init__(self):
        for field in ("k_semicrystalline", "k_amorphous", "rho", "cp_semicrystalline",
                      "cp_amorphous", "h_fusion", "h_crystallization", "delta_t_transition"):
            value = getattr(self, field)
            if not (math.isfinite(value) and value > 0):
                raise MaterialError(f"{self.name}: {field} must be positive, got {value}")
        if not (math.isfinite(self.t_fusion) and math.isfinite(self.t_crystallization)):
            raise MaterialError(f"{self.name}: transition temperatures must be finite")
        if not self.t_crystallization < self.t_fusion:
            raise MaterialError(
                f"{self.name}: t_crystallization ({self.t_crystallization}) must be below "
                f"t_fusion ({self.t_fusion})"
            )
        # The latent gap must stay positive across both windows or H(T) stops
        # being monotone.
        for branch in Branch:
            center = self.center(branch)
            for t in (center - self.delta_t_transition, center + self.delta_t_transition):
                if self.latent_gap(branch, t) <= 0:
                    raise MaterialError(f"{self.name}: latent gap vanishes at {t} °C")

    @property
    def is_pcm(self) -> bool:
        return True

    @property
    def dcp(self) -> float:
        return self.cp_amorphous - self.cp_semicrystalline

    def center(self, branch: Branch) -> float:
        return self.t_fusion if branch is Branch.HEATING else self.t_crystallization

    def latent(self, branch: Branch) -> float:
        return self.h_fusion if branch is Branch.HEATING else self.h_crystallization

    def latent_gap(self, branch: Branch, temperature):
        """Amorphous minus semi-crystalline enthalpy at ``temperature`` on ``branch``."""
        return self.latent(branch) + self.dcp * (temperature - self.center(branch))

    def ramp(self, branch: Branch, temperature):
        """Transition fraction of ``branch`` at ``temperature`` (0 below, 1 above the window)."""
        start = self.center(branch) - self.delta_t_transition
        return np.clip((np.asarray(temperature, dtype=float) - start)
                       / (2.0 * self.delta_t_transition), 0.0, 1.0)

    def conductivity(self, liquid_fraction):
        return self.k_semicrystalline + liquid_fraction * (self.k_amorphous - self.k_semicrystalline)

    def with_updates(self, **changes) -> "PcmMaterial":
        return replace(self, **changes)


AnyMaterial = Union[Material, PcmMaterial]


class MaterialTable:
    """Per-cell material constants as flat arrays (plain conductors have ``is_pcm`` False)."""

    def __init__(self, materials):
        n = len(materials)
        self.is_pcm = np.array([m.is_pcm for m in materials], dtype=bool)
        self.rho = np.array([m.rho for m in materials], dtype=float)
        self.cp_s = np.array([m.cp_semicrystalline if m.is_pcm else m.cp for m in materials])
        self.dcp = np.array([m.dcp if m.is_pcm else 0.0 for m in materials])
        self.k_s = np.array([m.k_semicrystalline if m.is_pcm else m.k for m in materials])
        self.k_l = np.array([m.k_amorphous if m.is_pcm else m.k for m in materials])
        nan = np.full(n, np.nan)
        self.t_fusion = np.where(self.is_pcm, [getattr(m, "t_fusion", 0.0) for m in materials], nan)
        self.t_cryst = np.where(self.is_pcm, [getattr(m, "t_crystallization", 0.0) for m in materials],
                                nan)
        self.h_fusion = np.array([getattr(m, "h_fusion", 0.0) for m in materials], dtype=float)
        self.h_cryst = np.array([getattr(m, "h_crystallization", 0.0) for m in materials],
                                dtype=float)
        self.half_width = np.array([getattr(m, "delta_t_transition", 1.0) for m in materials],
                                   dtype=float)

    def __len__(self):
        return len(self.rho)

    def conductivity(self, fraction):
        return self.k_s + fraction * (self.k_l - self.k_s)

    def ramp(self, heating, temperature):
        """Transition fraction of the selected branch (boolean array ``heating``)."""
        center = np.where(heating, self.t_fusion, self.t_cryst)
        return np.clip((temperature - (center - self.half_width)) / (2.0 * self.half_width),
                       0.0, 1.0)

    def update_phase(self, heating, fraction, t_old, t_new):
        """Vectorized :func:`update_phase_state`; returns new ``(heating, fraction)``."""
        up = self.is_pcm & (t_new > t_old)
        down = self.is_pcm & (t_new < t_old)
        heating = np.where(up, True, np.where(down, False, heating))
        phi = np.where(up, np.maximum(fraction, self.ramp(True, t_new)), fraction)
        phi = np.where(down, np.minimum(fraction, self.ramp(False, t_new)), phi)
        return heating, phi


class BranchCurves:
    """Vectorized enthalpy curves for a batch of cells with frozen phase states.

    Each PCM cell's curve has three segments in temperature: constant fraction
    ``phi_lo`` below ``t_lo``, the branch ramp on ``[t_lo, t_hi]`` and constant
    fraction ``phi_hi`` above ``t_hi``. Plain conductors use a single linear
    segment. Everything is in specific (per kg) units.
    """

    def __init__(self, table: MaterialTable, heating, fraction):
        pcm = table.is_pcm
        heating = np.asarray(heating, dtype=bool)
        phi = np.where(pcm, fraction, 0.0)
        self.cp_s = table.cp_s
        self.dcp = table.dcp
        w = 2.0 * table.half_width
        center = np.where(heating, table.t_fusion, table.t_cryst)
        latent = np.where(heating, table.h_fusion, table.h_cryst)
        start = center - table.half_width
        self.width = w
        self.ramp_start = np.where(pcm, start, 0.0)
        self.gap_offset = np.where(pcm, latent - table.dcp * center, 0.0)
        self.gap_at_start = self.gap_offset + self.dcp * self.ramp_start
        inf = np.inf
        self.t_lo = np.where(pcm, np.where(heating, start + w * phi, start), inf)
        self.t_hi = np.where(pcm, np.where(heating, start + w, start + w * phi), inf)
        self.phi_lo = np.where(heating, phi, 0.0)
        self.phi_hi = np.where(pcm, np.where(heating, 1.0, phi), 0.0)
        with np.errstate(invalid="ignore"):
            self.h_lo = np.where(pcm, self._linear(self.t_lo, self.phi_lo), inf)
            self.h_hi = np.where(pcm, self._linear(self.t_hi, self.phi_hi), inf)

    @classmethod
    def for_states(cls, materials, states) -> "BranchCurves":
        table = MaterialTable(materials)
        heating = np.array([s.branch is Branch.HEATING for s in states], dtype=bool)
        fraction = np.array([s.liquid_fraction for s in states], dtype=float)
        return cls(table, heating, fraction)

    def _linear(self, temperature, phi):
        return self.cp_s * temperature + phi * (self.gap_offset + self.dcp * temperature)

    def fraction(self, temperature):
        t = np.asarray(temperature, dtype=float)
        ramp = (t - self.ramp_start) / self.width
        return np.where(t <= self.t_lo, self.phi_lo, np.where(t >= self.t_hi, self.phi_hi, ramp))

    def enthalpy(self, temperature):
        t = np.asarray(temperature, dtype=float)
        return self._linear(t, self.fraction(t))

    def capacity(self, temperature):
        """dH/dT along the frozen curve; the upper one-sided value at segment joints."""
        t = np.asarray(temperature, dtype=float)
        cap = self.cp_s + self.fraction(t) * self.dcp
        on_ramp = (t >= self.t_lo) & (t < self.t_hi)
        return np.where(on_ramp, cap + (self.gap_offset + self.dcp * t) / self.width, cap)

    def temperature(self, enthalpy):
        h = np.asarray(enthalpy, dtype=float)
        t_below = (h - self.phi_lo * self.gap_offset) / (self.cp_s + self.phi_lo * self.dcp)
        t_above = (h - self.phi_hi * self.gap_offset) / (self.cp_s + self.phi_hi * self.dcp)
        # Ramp: H = cp_s*a + B*u + A*u**2 with u = T - a; stable root form.
        a = self.ramp_start
        qa = self.dcp / self.width
        qb = self.cp_s + self.gap_at_start / self.width
        qc = h - self.cp_s * a
        disc = np.sqrt(np.maximum(qb * qb + 4.0 * qa * qc, 0.0))
        t_ramp = a + 2.0 * qc / (qb + disc)
        return np.where(h <= self.h_lo, t_below, np.where(h >= self.h_hi, t_above, t_ramp))


def _check_temperature(temperature: float) -> float:
    t = float(temperature)
    if not math.isfinite(t):
        raise MaterialError(f"temperature must be finite, got {temperature}")
    return t


def _curves(material: AnyMaterial, state: PhaseState | None) -> BranchCurves:
    return BranchCurves.for_states([material], [state if state is not None else PhaseState()])


def enthalpy(material: AnyMaterial, temperature: float, state: PhaseState | None = None) -> float:
    """Specific enthalpy (J/kg, referenced to 0 °C) on the branch of ``state``.

    The fraction follows the branch from the carried-over value in ``state``:
    on heating it only grows once the melting ramp exceeds it, on cooling it
    only shrinks once the crystallization ramp drops below it.
    """
    t = _check_temperature(temperature)
    return float(_curves(material, state).enthalpy(np.array([t]))[0])


def apparent_heat_capacity(material: AnyMaterial, temperature: float,
                           state: PhaseState | None = None) -> float:
    """dH/dT (J/(kg K)) on the branch of ``state``."""
    t = _check_temperature(temperature)
    return float(_curves(material, state).capacity(np.array([t]))[0])


def temperature_from_enthalpy(material: AnyMaterial, specific_enthalpy: float,
                              state: PhaseState | None = None) -> float:
    """Closed-form inverse of :func:`enthalpy` on the same branch."""
    h = float(specific_enthalpy)
    if not math.isfinite(h):
        raise MaterialError(f"enthalpy must be finite, got {specific_enthalpy}")
    curves = _curves(material, state)
    h_min, h_max = curves.enthalpy(np.array(T_RANGE))
    if not (h_min <= h <= h_max):
        raise EnthalpyRangeError(
            f"{material.name}: enthalpy {h} J/kg outside [{h_min}, {h_max}] "
            f"(T in {T_RANGE} °C)"
        )
    return float(curves.temperature(np.array([h]))[0])


def update_phase_state(material: AnyMaterial, state: PhaseState, t_old: float,
                       t_new: float) -> PhaseState:
    """Advance the hysteresis state along a temperature change.

    Rising temperature selects the heating branch, falling selects cooling.
    The carried-over fraction is held until the new branch's ramp reaches it.
    """
    if not material.is_pcm:
        return state
    t_old = _check_temperature(t_old)
    t_new = _check_temperature(t_new)
    if t_new > t_old:
        phi = max(state.liquid_fraction, float(material.ramp(Branch.HEATING, t_new)))
        return PhaseState(Branch.HEATING, phi)
    if t_new < t_old:
        phi = min(state.liquid_fraction, float(material.ramp(Branch.COOLING, t_new)))
        return PhaseState(Branch.COOLING, phi)
    return state


# ---------------------------------------------------------------------------
# Built-in library
# ---------------------------------------------------------------------------

PUX_1500_20 = PcmMaterial(
    name="pux-1500-20",
    k_semicrystalline=0.231,
    k_amorphous=0.231,
    rho=1140.0,
    cp_semicrystalline=1310.0,
    cp_amorphous=1510.0,
    t_fusion=38.0,
    t_crystallization=22.3,
    h_fusion=91000.0,
    h_crystallization=89000.0,
    delta_t_transition=2.0,
)

BRICK = Material("brick", k=1.15, rho=2300.0, cp=920.0)
AIR = Material("air", k=0.03, rho=1.20, cp=1000.0)
# No measured value exists for the coating; a generic cement mortar is used.
CEMENT = Material("cement", k=1.0, rho=1800.0, cp=1000.0)

LIBRARY: dict[str, AnyMaterial] = {m.name: m for m in (PUX_1500_20, BRICK, AIR, CEMENT)}


def get_material(name: str, extra: dict[str, AnyMaterial] | None = None) -> AnyMaterial:
    """Look up a material id, preferring ``extra`` over the built-in library."""
    if extra and name in extra:
        return extra[name]
    try:
        return LIBRARY[name]
    except KeyError:
        known = sorted(set(LIBRARY) | set(extra or ()))
        raise MaterialError(f"unknown material {name!r}; known: {', '.join(known)}") from None
