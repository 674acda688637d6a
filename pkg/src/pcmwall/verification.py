"""Automated verification checks, one per acceptance criterion.

Each check returns a :class:`CheckResult`; ``run_checks`` runs a selection
and is what ``pcmwall verify`` and the acceptance tests call.
"""

from __future__ import annotations

import dataclasses
import functools
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .assembly import Layer, LayerStack, input_temperature, daily_sinusoid
from .calibration import Calibration, calibrate, evaluate, with_cavity
from .config import load_config, parse_config, preset_names, serialize_config
from .materials import BRICK
from .metrics import energy_audit, rate_minima
from .oracles import (
    StefanSolution,
    convergence_study,
    periodic_slab,
    sharp_pcm,
    simulate_periodic_slab,
    simulate_stefan,
)
from .scenario import run_scenario
from .solver import run

PLATEAU_BAND = (33.0, 39.0)  # °C


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.detail} ({self.seconds:.1f} s)"


@dataclass(frozen=True)
class Check:
    name: str
    description: str
    func: Callable[[], CheckResult]
    budget: float | None = None  # s; exceeding it fails the check


def _result(name, passed, detail, **values):
    return CheckResult(name, bool(passed), detail, values)


def check_sinusoid_fidelity() -> CheckResult:
    bc = daily_sinusoid()
    expected = {0.0: 15.0, 6.0: 32.5, 12.0: 50.0, 18.0: 32.5, 24.0: 15.0}
    got = {t: input_temperature(bc, t) for t in expected}
    worst = max(abs(got[t] - v) for t, v in expected.items())
    return _result("sinusoid-fidelity", worst <= 1e-12, f"max deviation {worst:.2e} K",
                   temperatures=got)


def check_periodic_oracle(conductivity_scale: float = 1.0) -> CheckResult:
    stack = LayerStack((Layer(BRICK, 0.05),))
    exact = periodic_slab(stack, 24.0)
    f, lag, _ = simulate_periodic_slab(stack, 24.0, dx=1e-4, dt_s=10.0, periods=10,
                                       conductivity_scale=conductivity_scale)
    err_f = abs(f - exact.decrement_factor) / exact.decrement_factor
    err_lag = abs(lag - exact.time_lag) / exact.time_lag
    ok = err_f < 0.005 and err_lag < 0.005
    return _result("periodic-oracle", ok,
                   f"f {f:.5f} vs {exact.decrement_factor:.5f} ({err_f:.2e}), "
                   f"lag {lag:.4f} vs {exact.time_lag:.4f} h ({err_lag:.2e})",
                   f=f, lag=lag, f_exact=exact.decrement_factor, lag_exact=exact.time_lag)


def check_stefan() -> CheckResult:
    material = sharp_pcm(0.05)
    t_wall = material.t_fusion + 20.0
    exact = StefanSolution.for_material(material, t_wall)
    length = 0.02
    t_end = exact.time_at(length / 2)
    n_steps = int(math.ceil(t_end))
    front, _ = simulate_stefan(material, t_wall, length, 400, t_end / n_steps, t_end)
    err = abs(front - length / 2) / (length / 2)
    study = convergence_study("stefan")
    ok = err < 0.01 and study.passed and all(o > 0 for o in study.orders)
    orders = ", ".join(f"{o:.2f}" for o in study.orders)
    return _result("stefan", ok, f"front error {err:.2e}, orders [{orders}]",
                   front=front, exact=length / 2, orders=study.orders)


def check_energy_conservation(per_run_budget: float = 5.0) -> CheckResult:
    residuals, seconds = {}, {}
    for name in preset_names():
        start = time.perf_counter()
        residuals[name] = energy_audit(run_scenario(load_config(name)))
        seconds[name] = time.perf_counter() - start
    worst = max(residuals, key=residuals.get)
    slowest = max(seconds, key=seconds.get)
    ok = all(r < 1e-4 for r in residuals.values()) and seconds[slowest] < per_run_budget
    return _result("energy-conservation", ok,
                   f"worst residual {residuals[worst]:.2e} ({worst}), "
                   f"slowest run {seconds[slowest]:.1f} s", residuals=residuals, seconds=seconds)


@functools.lru_cache(maxsize=1)
def reference_calibration() -> Calibration:
    return calibrate(load_config("paper-sinusoid-nopcm"))


def _calibrated_runs():
    cal = reference_calibration()
    ref = with_cavity(load_config("paper-sinusoid-nopcm"), cal.cavity_thickness)
    pcm = with_cavity(load_config("paper-sinusoid-pcm"), cal.cavity_thickness)
    return cal, evaluate(ref), evaluate(pcm)


def check_calibrated_metrics() -> CheckResult:
    cal, (_, ref), (_, pcm) = _calibrated_runs()
    conditions = {
        "f(air) in [0.36, 0.42]": 0.36 <= ref.decrement_factor <= 0.42,
        "lag(air) in [3.5, 5.5]": 3.5 <= ref.time_lag <= 5.5,
        "lag(pcm) in [5.5, 8.5]": 5.5 <= pcm.time_lag <= 8.5,
        "lag difference >= 1.5": pcm.time_lag - ref.time_lag >= 1.5,
        "peak(pcm) <= 38.5": pcm.t_out_max <= 38.5,
        "f(pcm) <= f(air)": pcm.decrement_factor <= ref.decrement_factor,
    }
    failed = [k for k, v in conditions.items() if not v]
    detail = (f"cavity {cal.cavity_thickness * 1e3:.0f} mm; air f {ref.decrement_factor:.3f} "
              f"lag {ref.time_lag:.2f} h; pcm f {pcm.decrement_factor:.3f} lag {pcm.time_lag:.2f} h "
              f"peak {pcm.t_out_max:.2f} C")
    if failed:
        detail += "; failed: " + "; ".join(failed)
    return _result("calibrated-metrics", not failed, detail, conditions=conditions,
                   cavity=cal.cavity_thickness, air=ref, pcm=pcm)


def check_incomplete_crystallization() -> CheckResult:
    cal = reference_calibration()
    cfg = with_cavity(load_config("paper-sinusoid-pcm"), cal.cavity_thickness)
    period = cfg.metrics.period
    seen = {}

    def capture(_solver, state):
        if abs(state.t - period) < 1e-9:
            seen["fraction"] = state.liquid_fraction[state.pcm].copy()

    run(cfg.build_stack(), cfg.boundary, cfg.probes, cfg.solver, period, cfg.output_interval,
        cfg.initial_temperature, on_step=capture)
    fraction = seen["fraction"]
    ok = bool(np.any(fraction > 0))
    return _result("incomplete-crystallization", ok,
                   f"max liquid fraction at {period:g} h = {fraction.max():.3f}",
                   max_fraction=float(fraction.max()))


def check_hotplate_plateau() -> CheckResult:
    found = {}
    for name in ("paper-hotplate-80c", "paper-hotplate-80c-air"):
        result = run_scenario(load_config(name))
        found[name] = rate_minima(result.times, result.probe(0.5), PLATEAU_BAND)
    pcm, air = found["paper-hotplate-80c"], found["paper-hotplate-80c-air"]
    ok = bool(pcm) and not air
    where = f"at {pcm[0][1]:.1f} C" if pcm else "none"
    return _result("hotplate-plateau", ok,
                   f"pcm rate minimum {where}; air minima in band: {len(air)}", minima=found)


def check_determinism_roundtrip() -> CheckResult:
    from .cli import simulate_files

    problems = []
    for name in preset_names():
        cfg = load_config(name)
        if parse_config(serialize_config(cfg)) != cfg:
            problems.append(f"{name} round-trip")
        text = serialize_config(cfg)
        if serialize_config(parse_config(text)) != text:
            problems.append(f"{name} serialize fixed point")
    name = "paper-sinusoid-pcm"
    outputs = []
    for _ in range(2):
        with tempfile.TemporaryDirectory() as tmp:
            paths = simulate_files(load_config(name), Path(tmp))
            outputs.append([p.read_bytes() for p in paths])
    if outputs[0] != outputs[1]:
        problems.append(f"{name} output differs between runs")
    return _result("determinism-roundtrip", not problems,
                   "identical outputs and round-trips" if not problems else "; ".join(problems))


def check_order_of_accuracy() -> CheckResult:
    space = convergence_study("periodic-space")
    tm = convergence_study("periodic-time")
    ok = (space.passed and tm.passed and abs(space.order - 2.0) <= 0.2
          and abs(tm.order - 1.0) <= 0.2)
    return _result("order-of-accuracy", ok,
                   f"space {space.order:.3f}, time {tm.order:.3f}",
                   space=space.order, time=tm.order)


CHECKS: tuple[Check, ...] = (
    Check("sinusoid-fidelity", "input sinusoid hits 15/32.5/50 C at 0/6/12/18/24 h",
          check_sinusoid_fidelity, 1.0),
    Check("periodic-oracle", "brick slab matches the transfer-matrix solution within 0.5 %",
          check_periodic_oracle, 30.0),
    Check("stefan", "melt front within 1 % of the Neumann solution; positive order",
          check_stefan, 60.0),
    Check("energy-conservation", "every preset conserves energy to 1e-4",
          check_energy_conservation),
    Check("calibrated-metrics", "calibrated air/PCM decrement factor, lag and peak",
          check_calibrated_metrics, 120.0),
    Check("incomplete-crystallization", "PCM is still partly amorphous after cycle one",
          check_incomplete_crystallization),
    Check("hotplate-plateau", "heating-rate minimum in the PCM band, none for air",
          check_hotplate_plateau, 10.0),
    Check("determinism-roundtrip", "bit-identical outputs and config round-trip",
          check_determinism_roundtrip),
    Check("order-of-accuracy", "spatial order 2 and temporal order 1 on the smooth problem",
          check_order_of_accuracy, 60.0),
)


def get_check(name: str) -> Check:
    for check in CHECKS:
        if check.name == name:
            return check
    raise KeyError(f"unknown check {name!r}")


def run_check(check: Check, func: Callable[[], CheckResult] | None = None) -> CheckResult:
    start = time.perf_counter()
    try:
        result = (func or check.func)()
    except Exception as exc:
        result = CheckResult(check.name, False, f"raised {type(exc).__name__}: {exc}")
    seconds = time.perf_counter() - start
    if check.budget is not None and seconds > check.budget:
        result = dataclasses.replace(result, passed=False,
                                     detail=f"{result.detail}; over the {check.budget:g} s budget")
    return dataclasses.replace(result, seconds=seconds)


def run_checks(names=None, conductivity_scale: float = 1.0, echo=None) -> list[CheckResult]:
    """Run the selected checks (default all); ``echo`` receives each result line."""
    selected = CHECKS if not names else tuple(get_check(n) for n in names)
    results = []
    for check in selected:
        func = None
        if check.name == "periodic-oracle" and conductivity_scale != 1.0:
            func = functools.partial(check_periodic_oracle, conductivity_scale)
        result = run_check(check, func)
        results.append(result)
        if echo is not None:
            echo(result.line())
    return results
