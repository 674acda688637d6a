"""Running a scenario config and writing its result files."""

from __future__ import annotations

import csv
import io
import math

import numpy as np

from .config import ScenarioConfig
from .metrics import MetricsReport, compute_metrics, energy_audit, extrema, storage_capacity
from .solver import RunResult, run


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    result = run(cfg.build_stack(), cfg.boundary, cfg.probes, cfg.solver, cfg.duration,
                 cfg.output_interval, cfg.initial_temperature)
    result.period = cfg.metrics.period
    return result


def report(cfg: ScenarioConfig, result: RunResult) -> MetricsReport:
    m = cfg.metrics
    return compute_metrics(result, m.period, m.window, m.cycle_tolerance,
                           m.require_cycle_convergence)


def summarize(cfg: ScenarioConfig, result: RunResult) -> dict[str, float | bool | str]:
    """Flat summary record. Cyclic metrics appear only for periodic scenarios."""
    record: dict[str, float | bool | str] = {"name": cfg.name}
    if cfg.metrics.period is not None:
        record.update(report(cfg, result).as_record())
    else:
        out = extrema(result.times, result.output)
        record.update({"t_out_max": out.max, "t_out_min": out.min, "peak_time": out.t_max,
                       "valley_time": out.t_min, "energy_residual": energy_audit(result),
                       "hysteresis_energy": result.hysteresis_energy})
    inp = result.input_temperature
    record["enthalpy_capacity"] = storage_capacity(result.stack, float(np.min(inp)), float(np.max(inp)))
    fraction = result.final_state.liquid_fraction[result.final_state.pcm]
    record["final_max_liquid_fraction"] = float(fraction.max()) if fraction.size else 0.0
    record["final_time"] = float(result.final_state.t)
    return record


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_header(cfg: ScenarioConfig) -> list[str]:
    return (["time_h", "input_C"] + [f"probe_{p!r}_C" for p in cfg.probes.positions]
            + ["flux_W_m2"])


def table_text(cfg: ScenarioConfig, result: RunResult) -> str:
    """Probe time series as CSV with round-trip float formatting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(cfg))
    for i, t in enumerate(result.times):
        row = [float(t), float(result.input_temperature[i])]
        row += [float(v) for v in result.probes[i]]
        row.append(float(result.flux[i]))
        writer.writerow([repr(v) for v in row])
    return buf.getvalue()


def summary_text(record: dict) -> str:
    return "".join(f"{key} = {_fmt(value)}\n" for key, value in record.items())


def parse_summary(text: str) -> dict[str, float | bool | str]:
    """Inverse of ``summary_text`` (numbers become floats)."""
    out: dict[str, float | bool | str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(" = ")
        if value in ("true", "false"):
            out[key] = value == "true"
        else:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out


def read_table(text: str):
    """Parse a probe table; returns (header, 2-D float array)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty table")
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != len(header):
        raise ValueError("table has no data rows or ragged rows")
    if not all(math.isfinite(v) for v in data[:, 0]):
        raise ValueError("non-finite time column")
    return header, data
