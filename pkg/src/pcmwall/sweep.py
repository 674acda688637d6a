"""Parameter sweeps over scenario configs.

A sweep file is TOML::

    base = "paper-sinusoid-pcm"     # preset id, or a config path relative to this file
    output = "sweep.csv"            # relative to this file
    workers = 4                     # default: available CPUs

    [overrides]                     # optional, merged into the base scenario
    duration = 30.0

    [[axes]]
    parameter = "cavity_thickness"  # full dotted path or a unique suffix of one
    values = [0.01, 0.02, 0.03, 0.04]

Every combination of axis values is an independent run. Rows are ordered
by axis index (last axis fastest) whatever order the cells finish in.
"""

from __future__ import annotations

import copy
import csv
import io
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .config import (
    ConfigError,
    _check_keys,
    _integer,
    _string,
    config_to_dict,
    deep_merge,
    load_config,
    loads,
    parse_dict,
    preset_names,
)
from .scenario import run_scenario, summarize

RESULT_COLUMNS = ("decrement_factor", "time_lag", "t_out_max", "t_out_min", "peak_time",
                  "valley_time", "t_in_max", "t_in_min", "energy_residual", "hysteresis_energy",
                  "cycle_converged", "enthalpy_capacity", "final_max_liquid_fraction")
ERROR_MARKER = "ERROR"


@dataclass(frozen=True)
class Axis:
    parameter: str  # resolved full dotted path
    values: tuple[Any, ...]


@dataclass(frozen=True)
class SweepConfig:
    base: dict  # fully populated scenario document
    axes: tuple[Axis, ...]
    output: Path | None = None
    workers: int | None = None

    def cells(self) -> list[tuple[tuple[int, ...], dict]]:
        """``(axis indices, scenario document)`` for every cell, in row order."""
        out = []
        for idx in itertools.product(*(range(len(a.values)) for a in self.axes)):
            doc = copy.deepcopy(self.base)
            for axis, i in zip(self.axes, idx):
                _set_path(doc, axis.parameter, axis.values[i])
            out.append((idx, doc))
        return out


def leaf_paths(doc: dict, prefix: str = "") -> list[str]:
    paths = []
    for key, value in doc.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            paths.extend(leaf_paths(value, path + "."))
        else:
            paths.append(path)
    return paths


def resolve_path(doc: dict, parameter: str) -> str:
    """Map a parameter name onto a unique leaf path of ``doc``."""
    paths = leaf_paths(doc)
    if parameter in paths:
        return parameter
    matches = [p for p in paths if p.endswith("." + parameter)]
    if len(matches) == 1:
        return matches[0]
    if not matches:
        raise ConfigError(f"sweep: unknown parameter path {parameter!r}")
    raise ConfigError(f"sweep: parameter {parameter!r} is ambiguous: {', '.join(sorted(matches))}")


def _set_path(doc: dict, path: str, value) -> None:
    keys = path.split(".")
    node = doc
    for key in keys[:-1]:
        node = node[key]
    node[keys[-1]] = value


def _base_document(base: str, root: Path) -> dict:
    path = root / base
    if base in preset_names() and not path.is_file():
        return config_to_dict(load_config(base))
    if not path.is_file():
        raise ConfigError(f"sweep: base {base!r} is neither a preset nor a file")
    return config_to_dict(load_config(path))


def parse_sweep(text: str, root: Path | str = ".") -> SweepConfig:
    root = Path(root)
    raw = loads(text)
    _check_keys(raw, ("base", "output", "workers", "overrides", "axes"), "sweep",
                required=("base", "axes"))
    doc = _base_document(_string(raw["base"], "sweep.base"), root)
    if "overrides" in raw:
        doc = config_to_dict(parse_dict(deep_merge(doc, raw["overrides"])))
    axes_raw = raw["axes"]
    if not isinstance(axes_raw, list) or not axes_raw:
        raise ConfigError("sweep: at least one [[axes]] entry is required")
    axes = []
    for i, entry in enumerate(axes_raw):
        where = f"axes[{i}]"
        _check_keys(entry, ("parameter", "values"), where, required=("parameter", "values"))
        values = entry["values"]
        if not isinstance(values, list) or not values:
            raise ConfigError(f"{where}.values: expected a non-empty array")
        axes.append(Axis(resolve_path(doc, _string(entry["parameter"], f"{where}.parameter")),
                         tuple(values)))
    if len({a.parameter for a in axes}) != len(axes):
        raise ConfigError("sweep: the same parameter appears on two axes")
    workers = raw.get("workers")
    if workers is not None and _integer(workers, "sweep.workers") < 1:
        raise ConfigError("sweep.workers must be >= 1")
    output = raw.get("output")
    return SweepConfig(doc, tuple(axes), None if output is None else root / _string(output, "sweep.output"),
                       workers)


def load_sweep(path: str | Path) -> SweepConfig:
    path = Path(path)
    return parse_sweep(path.read_text(encoding="utf-8"), path.parent)


def run_cell(doc: dict) -> dict:
    """Run one cell; failures are returned as an error entry rather than raised."""
    try:
        cfg = parse_dict(doc)
        record = summarize(cfg, run_scenario(cfg))
    except Exception as exc:  # one bad cell must not sink the sweep
        return {"error": f"{ERROR_MARKER}: {type(exc).__name__}: {exc}"}
    record["error"] = ""
    return record


def run_sweep(sweep: SweepConfig, workers: int | None = None) -> list[dict]:
    """Execute every cell and return one row dict per cell in row order."""
    cells = sweep.cells()
    workers = workers or sweep.workers or os.cpu_count() or 1
    docs = [doc for _, doc in cells]
    if workers > 1 and len(docs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(docs))) as pool:
            records = list(pool.map(run_cell, docs))
    else:
        records = [run_cell(doc) for doc in docs]
    rows = []
    for (idx, _), record in zip(cells, records):
        row = {"index": "-".join(map(str, idx))}
        row.update({a.parameter: a.values[i] for a, i in zip(sweep.axes, idx)})
        row.update({c: record.get(c, "") for c in RESULT_COLUMNS})
        row["error"] = record["error"]
        rows.append(row)
    return rows


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(sweep: SweepConfig, rows: list[dict]) -> str:
    header = ["index"] + [a.parameter for a in sweep.axes] + list(RESULT_COLUMNS) + ["error"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(row[h]) for h in header])
    return buf.getvalue()
