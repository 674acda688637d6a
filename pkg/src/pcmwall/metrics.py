"""Thermal-inertia metrics and audit quantities computed from run results."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .assembly import LayerStack
from .materials import enthalpy
from .solver import RunResult


class MetricError(ValueError):
    """A metric is undefined for the given input."""


@dataclass(frozen=True)
class Extrema:
    max: float
    t_max: float
    min: float
    t_min: float


def _refine(times, values, i, sign):
    """3-point parabolic vertex around sample ``i``; ``sign`` = +1 for a max."""
    if i <= 0 or i >= len(values) - 1:
        return values[i], times[i]
    y0, y1, y2 = values[i - 1], values[i], values[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0 or sign * denom > 0:
        return y1, times[i]
    offset = 0.5 * (y0 - y2) / denom
    h = times[i + 1] - times[i]
    return y1 - 0.25 * (y0 - y2) * offset, times[i] + offset * h


def extrema(times: Sequence[float], values: Sequence[float],
            window: tuple[float, float] | None = None) -> Extrema:
    """Max and min of a uniformly sampled series within ``window`` (inclusive).

    Interior extrema are refined by a parabola through the neighbouring
    samples; extrema on the window boundary are returned as sampled. Ties go
    to the earliest sample.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (times[0], times[-1]) if len(times) else (0.0, 0.0)
    lo, hi = window
    eps = 1e-9 * max(1.0, abs(hi))
    idx = np.nonzero((times >= lo - eps) & (times <= hi + eps))[0]
    if idx.size == 0:
        raise MetricError(f"no samples in window {window}")
    first, last = idx[0], idx[-1]
    seg = values[first:last + 1]
    i_max = first + int(np.argmax(seg))
    i_min = first + int(np.argmin(seg))

    def interior(i):
        return first < i < last

    vmax, tmax = _refine(times, values, i_max, +1) if interior(i_max) else (values[i_max], times[i_max])
    vmin, tmin = _refine(times, values, i_min, -1) if interior(i_min) else (values[i_min], times[i_min])
    return Extrema(float(vmax), float(tmax), float(vmin), float(tmin))


def decrement_factor(output: Extrema, inp: Extrema) -> float:
    """Output swing over input swing."""
    swing = inp.max - inp.min
    if not swing > 0:
        raise MetricError("decrement factor undefined for zero input amplitude")
    return (output.max - output.min) / swing


def time_lag(input_peak: float, output_peak: float, period: float) -> float:
    """Peak-to-peak delay reduced to ``[0, period)``."""
    if not period > 0:
        raise MetricError(f"period must be positive, got {period}")
    lag = math.fmod(output_peak - input_peak, period)
    if lag < 0:
        lag += period
    return 0.0 if lag >= period else lag


def energy_mismatch(result: RunResult) -> float:
    """Boundary plus source heat input minus the stored enthalpy change, J/m2.

    The hysteresis re-anchoring energy is bookkept explicitly, so this
    measures only the numerical conservation error.
    """
    stored = result.final_energy - result.initial_energy - result.hysteresis_energy
    return result.boundary_energy + result.source_energy - stored


def energy_audit(result: RunResult) -> float:
    """Relative conservation residual ``|mismatch| / max(|stored|, eps)``.

    ``eps`` is a millionth of the initial heat content (0 °C reference), so
    runs that store almost nothing report round-off rather than noise/noise.
    """
    stored = result.final_energy - result.initial_energy - result.hysteresis_energy
    eps = 1e-6 * abs(result.initial_energy)
    scale = max(abs(stored), eps)
    mismatch = abs(energy_mismatch(result))
    return mismatch / scale if scale > 0 else mismatch


def cycle_convergence(times: Sequence[float], series, period: float, tolerance: float) -> bool:
    """True when the last period repeats the one before it within ``tolerance`` at every probe.

    ``series`` is one column per probe (or a single 1-D series).
    """
    times = np.asarray(times, dtype=float)
    data = np.asarray(series, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if len(times) < 2 or times[-1] - times[0] < 2.0 * period - 1e-9:
        raise MetricError("cycle convergence needs a run spanning at least two periods")
    dt = times[1] - times[0]
    shift = int(round(period / dt))
    if abs(shift * dt - period) > 1e-6 * period:
        raise MetricError("sampling interval must divide the period")
    last = times >= times[-1] - period - 1e-9
    idx = np.nonzero(last)[0]
    diff = np.abs(data[idx] - data[idx - shift])
    return bool(np.max(diff) < tolerance)


@dataclass(frozen=True)
class MetricsReport:
    decrement_factor: float
    time_lag: float  # h
    t_out_max: float
    t_out_min: float
    peak_time: float
    valley_time: float
    t_in_max: float
    t_in_min: float
    energy_residual: float
    hysteresis_energy: float  # J/m2, branch non-closure (not a numerical error)
    cycle_converged: bool

    def as_record(self) -> dict[str, float | bool]:
        return asdict(self)


def output_metrics(times, inp, out, period: float, window: tuple[float, float] | None = None):
    """Decrement factor and lag of ``out`` against ``inp``.

    The output peak and the input extrema are taken in ``window`` (default the
    first period). The output valley is the minimum over the period that
    follows the output peak, clipped to the series end, so that a run started
    from rest reports the trough of its first cooling phase rather than its
    initial state.
    """
    times = np.asarray(times, dtype=float)
    if window is None:
        window = (times[0], times[0] + period)
    inp_ext = extrema(times, inp, window)
    peak = extrema(times, out, window)
    follow = (peak.t_max, min(peak.t_max + period, times[-1]))
    valley = extrema(times, out, follow)
    out_ext = Extrema(peak.max, peak.t_max, valley.min, valley.t_min)
    f = decrement_factor(out_ext, inp_ext)
    lag = time_lag(inp_ext.t_max, out_ext.t_max, period)
    return f, lag, out_ext, inp_ext


def compute_metrics(result: RunResult, period: float | None = None,
                    window: tuple[float, float] | None = None,
                    cycle_tolerance: float = 0.01,
                    require_converged: bool = False) -> MetricsReport:
    period = period if period is not None else result.period
    if period is None:
        raise MetricError("a period is needed for cyclic metrics")
    times = result.times
    if len(times) < 3:
        raise MetricError("run too short for metrics")
    try:
        converged = cycle_convergence(times, result.probes, period, cycle_tolerance)
    except MetricError:
        converged = False
    if require_converged:
        if not converged:
            raise MetricError("run has not reached a periodic steady state")
        if window is None:
            window = (times[-1] - period, times[-1])
    f, lag, out_ext, in_ext = output_metrics(times, result.input_temperature, result.output,
                                             period, window)
    return MetricsReport(
        decrement_factor=f,
        time_lag=lag,
        t_out_max=out_ext.max,
        t_out_min=out_ext.min,
        peak_time=out_ext.t_max,
        valley_time=out_ext.t_min,
        t_in_max=in_ext.max,
        t_in_min=in_ext.min,
        energy_residual=energy_audit(result),
        hysteresis_energy=result.hysteresis_energy,
        cycle_converged=converged,
    )


def storage_capacity(stack: LayerStack, t_low: float, t_high: float) -> float:
    """Enthalpy taken up per m2 of wall heated from ``t_low`` to ``t_high`` (J/m2).

    PCM starts fully semi-crystalline and follows its heating branch.
    """
    return math.fsum(layer.thickness * layer.material.rho
                     * (enthalpy(layer.material, t_high) - enthalpy(layer.material, t_low))
                     for layer in stack.layers)


def rate_minima(times, values, band: tuple[float, float],
                prominence: float = 0.01) -> list[tuple[float, float, float]]:
    """Plateaus: local minima of the heating rate dT/dt while ``values`` lie in ``band``.

    A minimum counts only if the rate rises again by at least ``prominence``
    (relative) on both sides before the next turning point, which filters out
    round-off ripples. Returns ``(t, T, rate)`` per minimum.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) < 3:
        return []
    rate = np.gradient(values, times)
    lo, hi = band
    out = []
    n = len(rate)
    for i in range(1, n - 1):
        if not (rate[i] < rate[i - 1] and rate[i] <= rate[i + 1] and rate[i] > 0):
            continue
        if not lo <= values[i] <= hi:
            continue
        left = i
        while left > 0 and rate[left - 1] >= rate[left]:
            left -= 1
        right = i
        while right < n - 1 and rate[right + 1] >= rate[right]:
            right += 1
        rise = min(rate[left], rate[right]) - rate[i]
        if rise >= prominence * rate[i]:
            out.append((float(times[i]), float(values[i]), float(rate[i])))
    return out
