"""Scenario configuration files (TOML).

A scenario is a TOML document with these tables; every key is optional
unless noted and unknown keys are errors::

    preset = "paper-sinusoid-pcm"   # start from a shipped preset, then merge
    name = "my-run"
    duration = 30.0                 # h
    output_interval = 0.1           # h, a whole number of solver steps
    initial_temperature = 15.0      # °C, default depends on the boundary

    [materials.<id>]                # inline material or override of a library id
    kind = "solid" | "pcm"
    k = 1.15                        # solid: k, rho, cp
    ...                             # pcm: every PcmMaterial field

    [stack]
    kind = "hollow_brick"           # shell_thickness, cavity_thickness,
                                    # skin_thickness, fill, shell, skin
    kind = "layers"                 # layers = [{material = "brick", thickness = 0.05}]

    [boundary]
    kind = "sinusoidal"             # offset, amplitude, period, phase
    kind = "constant"               # value, duration, then_ambient
    kind = "timeseries"             # samples = [[t_h, T_C], ...]

    [probes]
    positions = [0.0, 0.25, 0.5, 0.75, 1.0]

    [solver]                        # SolverConfig fields

    [metrics]
    period = 24.0                   # periodic boundaries only
    window = [0.0, 24.0]
    require_cycle_convergence = false
    cycle_tolerance = 0.01

``parse_config`` fills every default, so ``serialize_config`` writes a
fully explicit document and parse/serialize is a fixed point.
"""

from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import tomli
import tomli_w

from .assembly import (
    AssemblyError,
    BoundaryCondition,
    ConstantTemperature,
    Layer,
    LayerStack,
    ProbeSet,
    Sinusoidal,
    TimeSeries,
    default_initial_temperature,
    hollow_brick_stack,
)
from .materials import LIBRARY, AnyMaterial, Material, MaterialError, PcmMaterial
from .solver import SolverConfig

DEFAULT_DURATION = 30.0
DEFAULT_OUTPUT_INTERVAL = 0.1
PRESET_PACKAGE = "pcmwall.presets"


class ConfigError(ValueError):
    """Malformed or invalid scenario/sweep configuration."""


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _check_keys(table: dict, allowed, where: str, required=()):
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: expected a table, got {type(table).__name__}")
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key {unknown[0]!r} (allowed: {', '.join(sorted(allowed))})")
    missing = [k for k in required if k not in table]
    if missing:
        raise ConfigError(f"{where}: missing required key {missing[0]!r}")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _string(value, where: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string, got {value!r}")
    return value


def deep_merge(base: dict, override: dict) -> dict:
    """Recursively merge ``override`` into a copy of ``base``; tables merge, values replace."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def loads(text: str) -> dict:
    """Parse TOML text, reporting syntax errors with line and column."""
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from None


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def preset_names() -> list[str]:
    files = resources.files(PRESET_PACKAGE).iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".toml"))


def preset_text(name: str) -> str:
    path = resources.files(PRESET_PACKAGE) / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(preset_names())}")
    return path.read_text(encoding="utf-8")


def _expand_presets(raw: dict, seen=()) -> dict:
    name = raw.get("preset")
    if name is None:
        return raw
    name = _string(name, "preset")
    if name in seen:
        raise ConfigError(f"preset cycle through {name!r}")
    base = _expand_presets(loads(preset_text(name)), seen + (name,))
    base.pop("preset", None)
    rest = {k: v for k, v in raw.items() if k != "preset"}
    return deep_merge(base, rest)


# ---------------------------------------------------------------------------
# Materials
# ---------------------------------------------------------------------------

SOLID_FIELDS = ("k", "rho", "cp")
PCM_FIELDS = tuple(f.name for f in dataclasses.fields(PcmMaterial) if f.name != "name")


def _material_to_dict(m: AnyMaterial) -> dict:
    fields = PCM_FIELDS if m.is_pcm else SOLID_FIELDS
    out = {"kind": "pcm" if m.is_pcm else "solid"}
    out.update({f: float(getattr(m, f)) for f in fields})
    return out


def _parse_material(mid: str, table: dict) -> AnyMaterial:
    where = f"materials.{mid}"
    base = LIBRARY.get(mid)
    kind = table.get("kind", None if base is None else ("pcm" if base.is_pcm else "solid"))
    if kind is None:
        raise ConfigError(f"{where}: missing required key 'kind' for a new material")
    if kind not in ("solid", "pcm"):
        raise ConfigError(f"{where}.kind: expected 'solid' or 'pcm', got {kind!r}")
    fields = PCM_FIELDS if kind == "pcm" else SOLID_FIELDS
    _check_keys(table, ("kind",) + fields, where)
    values = {}
    if base is not None and base.is_pcm == (kind == "pcm"):
        values = {f: getattr(base, f) for f in fields}
    for f in fields:
        if f in table:
            values[f] = _number(table[f], f"{where}.{f}")
    required = [f for f in fields if f not in values and not (kind == "pcm" and f == "delta_t_transition")]
    if required:
        raise ConfigError(f"{where}: missing required key {required[0]!r}")
    try:
        return PcmMaterial(name=mid, **values) if kind == "pcm" else Material(name=mid, **values)
    except MaterialError as exc:
        raise ConfigError(f"{where}: {exc}") from None


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HollowBrick:
    shell_thickness: float
    cavity_thickness: float
    skin_thickness: float
    fill: str
    shell: str = "brick"
    skin: str = "cement"

    def material_ids(self) -> list[str]:
        return [self.skin, self.shell, self.fill]


@dataclass(frozen=True)
class ExplicitLayers:
    layers: tuple[tuple[str, float], ...]

    def material_ids(self) -> list[str]:
        return [m for m, _ in self.layers]


StackSpec = HollowBrick | ExplicitLayers


@dataclass(frozen=True)
class MetricsSettings:
    period: float | None = None
    window: tuple[float, float] | None = None
    require_cycle_convergence: bool = False
    cycle_tolerance: float = 0.01


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    materials: dict[str, AnyMaterial]
    stack: StackSpec
    boundary: BoundaryCondition
    probes: ProbeSet
    solver: SolverConfig
    duration: float
    output_interval: float
    initial_temperature: float
    metrics: MetricsSettings

    def build_stack(self) -> LayerStack:
        s = self.stack
        if isinstance(s, HollowBrick):
            return hollow_brick_stack(s.shell_thickness, s.cavity_thickness, s.skin_thickness,
                                      s.fill, shell=s.shell, skin=s.skin, materials=self.materials)
        return LayerStack(tuple(Layer(self.materials[m], t) for m, t in s.layers))

    def to_dict(self) -> dict:
        return config_to_dict(self)


TOP_KEYS = ("preset", "name", "duration", "output_interval", "initial_temperature",
            "materials", "stack", "boundary", "probes", "solver", "metrics")
SOLVER_KEYS = tuple(f.name for f in dataclasses.fields(SolverConfig))


def _parse_stack(table: dict) -> StackSpec:
    kind = table.get("kind", "hollow_brick")
    if kind == "hollow_brick":
        _check_keys(table, ("kind", "shell_thickness", "cavity_thickness", "skin_thickness",
                            "fill", "shell", "skin"), "stack",
                    required=("shell_thickness", "cavity_thickness", "fill"))
        return HollowBrick(
            shell_thickness=_number(table["shell_thickness"], "stack.shell_thickness"),
            cavity_thickness=_number(table["cavity_thickness"], "stack.cavity_thickness"),
            skin_thickness=_number(table.get("skin_thickness", 0.0), "stack.skin_thickness"),
            fill=_string(table["fill"], "stack.fill"),
            shell=_string(table.get("shell", "brick"), "stack.shell"),
            skin=_string(table.get("skin", "cement"), "stack.skin"),
        )
    if kind == "layers":
        _check_keys(table, ("kind", "layers"), "stack", required=("layers",))
        layers = table["layers"]
        if not isinstance(layers, list) or not layers:
            raise ConfigError("stack.layers: expected a non-empty array of tables")
        out = []
        for i, layer in enumerate(layers):
            where = f"stack.layers[{i}]"
            _check_keys(layer, ("material", "thickness"), where, required=("material", "thickness"))
            out.append((_string(layer["material"], f"{where}.material"),
                        _number(layer["thickness"], f"{where}.thickness")))
        return ExplicitLayers(tuple(out))
    raise ConfigError(f"stack.kind: expected 'hollow_brick' or 'layers', got {kind!r}")


def _parse_boundary(table: dict) -> BoundaryCondition:
    kind = table.get("kind")
    try:
        if kind == "sinusoidal":
            _check_keys(table, ("kind", "offset", "amplitude", "period", "phase"), "boundary",
                        required=("offset", "amplitude", "period"))
            return Sinusoidal(_number(table["offset"], "boundary.offset"),
                              _number(table["amplitude"], "boundary.amplitude"),
                              _number(table["period"], "boundary.period"),
                              _number(table.get("phase", 0.0), "boundary.phase"))
        if kind == "constant":
            _check_keys(table, ("kind", "value", "duration", "then_ambient"), "boundary",
                        required=("value",))
            return ConstantTemperature(_number(table["value"], "boundary.value"),
                                       _number(table.get("duration", math.inf), "boundary.duration"),
                                       _number(table.get("then_ambient", 20.0), "boundary.then_ambient"))
        if kind == "timeseries":
            _check_keys(table, ("kind", "samples"), "boundary", required=("samples",))
            samples = table["samples"]
            if not isinstance(samples, list) or any(not isinstance(s, list) or len(s) != 2 for s in samples):
                raise ConfigError("boundary.samples: expected an array of [t_h, T_C] pairs")
            return TimeSeries(tuple((_number(t, "boundary.samples"), _number(v, "boundary.samples"))
                                    for t, v in samples))
    except AssemblyError as exc:
        raise ConfigError(f"boundary: {exc}") from None
    raise ConfigError(f"boundary.kind: expected 'sinusoidal', 'constant' or 'timeseries', got {kind!r}")


def _parse_solver(table: dict) -> SolverConfig:
    _check_keys(table, SOLVER_KEYS, "solver")
    kw: dict[str, Any] = {}
    for key in ("dt", "newton_tolerance", "dx", "volumetric_source"):
        if key in table:
            kw[key] = _number(table[key], f"solver.{key}")
    for key in ("max_newton_iters", "cells_per_layer"):
        if key in table:
            kw[key] = _integer(table[key], f"solver.{key}")
    if "contact_resistance" in table:
        rc = table["contact_resistance"]
        if isinstance(rc, list):
            kw["contact_resistance"] = tuple(_number(v, "solver.contact_resistance") for v in rc)
        else:
            kw["contact_resistance"] = _number(rc, "solver.contact_resistance")
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None


def _parse_metrics(table: dict, boundary: BoundaryCondition) -> MetricsSettings:
    _check_keys(table, ("period", "window", "require_cycle_convergence", "cycle_tolerance"), "metrics")
    period = table.get("period")
    if period is None and isinstance(boundary, Sinusoidal):
        period = boundary.period
    if period is not None:
        period = _number(period, "metrics.period")
        if not period > 0:
            raise ConfigError(f"metrics.period must be positive, got {period}")
    window = table.get("window")
    if window is not None:
        if not isinstance(window, list) or len(window) != 2:
            raise ConfigError("metrics.window: expected [start, end]")
        window = (_number(window[0], "metrics.window"), _number(window[1], "metrics.window"))
        if not window[1] > window[0]:
            raise ConfigError(f"metrics.window must have end > start, got {window}")
    elif period is not None:
        window = (0.0, period)
    require = table.get("require_cycle_convergence", False)
    if not isinstance(require, bool):
        raise ConfigError("metrics.require_cycle_convergence: expected a boolean")
    tol = _number(table.get("cycle_tolerance", 0.01), "metrics.cycle_tolerance")
    return MetricsSettings(period, window, require, tol)


def parse_dict(raw: dict) -> ScenarioConfig:
    """Validate a decoded document (presets expanded) into a ScenarioConfig."""
    raw = _expand_presets(raw)
    _check_keys(raw, TOP_KEYS, "config", required=("stack", "boundary"))

    materials_table = raw.get("materials", {})
    _check_keys(materials_table, materials_table.keys(), "materials")
    materials = {mid: _parse_material(mid, tbl) for mid, tbl in materials_table.items()}

    stack = _parse_stack(raw["stack"])
    for mid in stack.material_ids():
        if mid not in materials:
            if mid not in LIBRARY:
                known = sorted(set(LIBRARY) | set(materials))
                raise ConfigError(f"stack: unresolved material id {mid!r}; known: {', '.join(known)}")
            materials[mid] = LIBRARY[mid]

    boundary = _parse_boundary(raw["boundary"])

    probes_table = raw.get("probes", {})
    _check_keys(probes_table, ("positions",), "probes")
    try:
        probes = ProbeSet(tuple(_number(p, "probes.positions") for p in probes_table["positions"])) \
            if "positions" in probes_table else ProbeSet()
    except AssemblyError as exc:
        raise ConfigError(f"probes: {exc}") from None
    if not probes.positions:
        raise ConfigError("probes.positions must not be empty")

    solver = _parse_solver(raw.get("solver", {}))
    duration = _number(raw.get("duration", DEFAULT_DURATION), "duration")
    interval = _number(raw.get("output_interval", DEFAULT_OUTPUT_INTERVAL), "output_interval")
    if not interval > 0:
        raise ConfigError(f"output_interval must be positive, got {interval}")
    if not duration >= interval:
        raise ConfigError(f"duration ({duration} h) must be >= output_interval ({interval} h)")
    for label, value in (("duration", duration), ("output_interval", interval)):
        n = round(value / solver.dt)
        if abs(n * solver.dt - value) > 1e-9 * max(value, 1.0):
            raise ConfigError(f"{label} ({value} h) is not a whole number of solver steps ({solver.dt} h)")

    if "initial_temperature" in raw:
        t0 = _number(raw["initial_temperature"], "initial_temperature")
    else:
        try:
            t0 = default_initial_temperature(boundary)
        except AssemblyError as exc:
            raise ConfigError(f"boundary: {exc}") from None

    metrics = _parse_metrics(raw.get("metrics", {}), boundary)
    name = _string(raw.get("name", "scenario"), "name")

    cfg = ScenarioConfig(name, materials, stack, boundary, probes, solver, duration, interval,
                         t0, metrics)
    try:
        cfg.build_stack()
    except (AssemblyError, KeyError) as exc:
        raise ConfigError(f"stack: {exc}") from None
    return cfg


def parse_config(text: str) -> ScenarioConfig:
    """Parse scenario TOML text, or a bare preset id."""
    stripped = text.strip()
    if stripped and "\n" not in stripped and "=" not in stripped and stripped in preset_names():
        return parse_dict({"preset": stripped})
    return parse_dict(loads(text))


def load_config(source: str | Path) -> ScenarioConfig:
    """Load a config from a file path or a preset id."""
    path = Path(source)
    if path.is_file():
        return parse_config(path.read_text(encoding="utf-8"))
    if str(source) in preset_names():
        return parse_dict({"preset": str(source)})
    raise ConfigError(f"no such config file or preset: {source}")


def config_to_dict(cfg: ScenarioConfig) -> dict:
    s = cfg.stack
    if isinstance(s, HollowBrick):
        stack = {"kind": "hollow_brick", **dataclasses.asdict(s)}
    else:
        stack = {"kind": "layers",
                 "layers": [{"material": m, "thickness": t} for m, t in s.layers]}
    b = cfg.boundary
    if isinstance(b, Sinusoidal):
        boundary = {"kind": "sinusoidal", "offset": b.offset, "amplitude": b.amplitude,
                    "period": b.period, "phase": b.phase}
    elif isinstance(b, ConstantTemperature):
        boundary = {"kind": "constant", "value": b.value, "duration": b.duration,
                    "then_ambient": b.then_ambient}
    else:
        boundary = {"kind": "timeseries", "samples": [list(p) for p in b.samples]}
    solver = {}
    for f in dataclasses.fields(SolverConfig):
        value = getattr(cfg.solver, f.name)
        if value is None:
            continue
        solver[f.name] = list(value) if isinstance(value, tuple) else value
    m = cfg.metrics
    metrics: dict[str, Any] = {"require_cycle_convergence": m.require_cycle_convergence,
                               "cycle_tolerance": m.cycle_tolerance}
    if m.period is not None:
        metrics["period"] = m.period
    if m.window is not None:
        metrics["window"] = list(m.window)
    return {
        "name": cfg.name,
        "duration": cfg.duration,
        "output_interval": cfg.output_interval,
        "initial_temperature": cfg.initial_temperature,
        "materials": {mid: _material_to_dict(mat) for mid, mat in cfg.materials.items()},
        "stack": stack,
        "boundary": boundary,
        "probes": {"positions": list(cfg.probes.positions)},
        "solver": solver,
        "metrics": metrics,
    }


def serialize_config(cfg: ScenarioConfig) -> str:
    """Fully explicit TOML for ``cfg``; ``parse_config`` of the result equals ``cfg``."""
    return tomli_w.dumps(config_to_dict(cfg))
