"""Command-line interface: ``pcmwall simulate|sweep|metrics|verify|presets``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, ScenarioConfig, load_config, preset_names, serialize_config
from .metrics import MetricError, output_metrics
from .scenario import read_table, summarize, summary_text, table_text, run_scenario
from .solver import SolverError
from .sweep import load_sweep, rows_to_csv, run_sweep


def simulate_files(cfg: ScenarioConfig, outdir: Path) -> list[Path]:
    """Run ``cfg`` and write ``<name>.csv`` and ``<name>.summary.txt`` into ``outdir``."""
    result = run_scenario(cfg)
    outdir.mkdir(parents=True, exist_ok=True)
    table = outdir / f"{cfg.name}.csv"
    summary = outdir / f"{cfg.name}.summary.txt"
    table.write_text(table_text(cfg, result), encoding="utf-8", newline="\n")
    summary.write_text(summary_text(summarize(cfg, result)), encoding="utf-8", newline="\n")
    return [table, summary]


def _window(text: str | None):
    if text is None:
        return None
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be 'start,end', got {text!r}") from None
    return a, b


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    for path in simulate_files(cfg, Path(args.output)):
        print(path)
    return 0


def cmd_sweep(args) -> int:
    sweep = load_sweep(args.config)
    rows = run_sweep(sweep, workers=args.workers)
    text = rows_to_csv(sweep, rows)
    target = Path(args.output) if args.output else sweep.output
    if target is None:
        sys.stdout.write(text)
    else:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8", newline="\n")
        print(target)
    failed = sum(1 for r in rows if r["error"])
    if failed:
        print(f"{failed} of {len(rows)} cells failed", file=sys.stderr)
    return 0


def cmd_metrics(args) -> int:
    header, data = read_table(Path(args.csv).read_text(encoding="utf-8"))
    if "time_h" not in header or "input_C" not in header:
        raise MetricError("table needs time_h and input_C columns")
    column = args.probe or [h for h in header if h.startswith("probe_")][-1]
    if column not in header:
        raise MetricError(f"no column {column!r} in table")
    times = data[:, header.index("time_h")]
    f, lag, out, inp = output_metrics(times, data[:, header.index("input_C")],
                                      data[:, header.index(column)], args.period, args.window)
    record = {"probe": column, "decrement_factor": f, "time_lag": lag,
              "t_out_max": out.max, "t_out_min": out.min, "peak_time": out.t_max,
              "valley_time": out.t_min, "t_in_max": inp.max, "t_in_min": inp.min}
    sys.stdout.write(summary_text(record))
    return 0


def cmd_verify(args) -> int:
    from .verification import CHECKS, run_checks

    if args.list:
        for check in CHECKS:
            print(f"{check.name}: {check.description}")
        return 0
    results = run_checks(args.check, conductivity_scale=args.perturb_conductivity, echo=print)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_presets(args) -> int:
    if args.name:
        sys.stdout.write(serialize_config(load_config(args.name)))
    else:
        print("\n".join(preset_names()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcmwall", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario (config file or preset id)")
    p.add_argument("config")
    p.add_argument("-o", "--output", default=".", help="output directory (default: .)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="table path (default: the sweep file's 'output')")
    p.add_argument("-j", "--workers", type=int, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="decrement factor and lag from a probe table")
    p.add_argument("csv")
    p.add_argument("--window", type=_window, help="'start,end' in hours (default: first period)")
    p.add_argument("--period", type=float, default=24.0, help="forcing period in hours")
    p.add_argument("--probe", help="output column (default: deepest probe)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("verify", help="run the verification checks")
    p.add_argument("--list", action="store_true", help="list checks without running them")
    p.add_argument("--check", action="append", help="run only this check (repeatable)")
    p.add_argument("--perturb-conductivity", type=float, default=1.0, metavar="SCALE",
                   help="scale the simulated slab conductivity in the oracle check (harness self-test)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("presets", help="list presets, or print one fully expanded")
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, MetricError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
