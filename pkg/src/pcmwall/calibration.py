"""Fitting the unpublished inner geometry of the hollow brick.

The brick's outer thickness is fixed; only the split between the two shells
and the cavity is free. The cavity is scanned on a regular grid and the
candidate whose air-filled response best matches the target decrement
factor and lag (relative squared error) is kept.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


from .config import HollowBrick, ScenarioConfig
from .scenario import report, run_scenario

TARGET_DECREMENT = 0.39
TARGET_LAG = 4.5  # h
BRICK_THICKNESS = 0.05  # m, both shells plus the cavity
CAVITY_GRID = tuple(round(1e-3 * mm, 6) for mm in range(10, 41))


@dataclass(frozen=True)
class CalibrationPoint:
    cavity_thickness: float
    decrement_factor: float
    time_lag: float
    objective: float


@dataclass(frozen=True)
class Calibration:
    best: CalibrationPoint
    points: tuple[CalibrationPoint, ...]

    @property
    def cavity_thickness(self) -> float:
        return self.best.cavity_thickness

    @property
    def shell_thickness(self) -> float:
        return shell_for(self.best.cavity_thickness)


def shell_for(cavity: float, total: float = BRICK_THICKNESS) -> float:
    return round((total - cavity) / 2.0, 9)


def with_cavity(cfg: ScenarioConfig, cavity: float, fill: str | None = None,
                total: float = BRICK_THICKNESS) -> ScenarioConfig:
    """Copy of a hollow-brick scenario with a new cavity and matching shells."""
    if not isinstance(cfg.stack, HollowBrick):
        raise TypeError("calibration needs a hollow_brick stack")
    stack = dataclasses.replace(cfg.stack, cavity_thickness=cavity,
                                shell_thickness=shell_for(cavity, total),
                                fill=cfg.stack.fill if fill is None else fill)
    return dataclasses.replace(cfg, stack=stack)


def evaluate(cfg: ScenarioConfig):
    """Run a scenario and return ``(result, metrics report)``."""
    result = run_scenario(cfg)
    return result, report(cfg, result)


def objective(f: float, lag: float) -> float:
    return ((f - TARGET_DECREMENT) / TARGET_DECREMENT) ** 2 + ((lag - TARGET_LAG) / TARGET_LAG) ** 2


def calibrate(reference: ScenarioConfig, cavities=CAVITY_GRID) -> Calibration:
    """Scan ``cavities`` (m) on the air-filled ``reference`` scenario."""
    points = []
    for cavity in cavities:
        _, report = evaluate(with_cavity(reference, cavity))
        points.append(CalibrationPoint(cavity, report.decrement_factor, report.time_lag,
                                       objective(report.decrement_factor, report.time_lag)))
    best = min(points, key=lambda p: (p.objective, p.cavity_thickness))
    return Calibration(best, tuple(points))
