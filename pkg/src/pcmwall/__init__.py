"""One-dimensional conduction through PCM-filled hollow brick walls."""

from .assembly import (
    ConstantTemperature,
    Layer,
    LayerStack,
    ProbeSet,
    Sinusoidal,
    TimeSeries,
    daily_sinusoid,
    hollow_brick_stack,
    input_temperature,
)
from .materials import (
    LIBRARY,
    Branch,
    Material,
    PcmMaterial,
    PhaseState,
    apparent_heat_capacity,
    enthalpy,
    get_material,
    temperature_from_enthalpy,
    update_phase_state,
)
from .metrics import MetricsReport, compute_metrics, energy_audit, extrema
from .solver import RunResult, SolverConfig, SolverError, run

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "ConstantTemperature",
    "LIBRARY",
    "Layer",
    "LayerStack",
    "Material",
    "MetricsReport",
    "PcmMaterial",
    "PhaseState",
    "ProbeSet",
    "RunResult",
    "Sinusoidal",
    "SolverConfig",
    "SolverError",
    "TimeSeries",
    "apparent_heat_capacity",
    "compute_metrics",
    "daily_sinusoid",
    "energy_audit",
    "enthalpy",
    "extrema",
    "get_material",
    "hollow_brick_stack",
    "input_temperature",
    "run",
    "temperature_from_enthalpy",
    "update_phase_state",
]
