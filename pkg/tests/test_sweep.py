import pytest

from pcmwall.config import ConfigError
from pcmwall.sweep import ERROR_MARKER, parse_sweep, resolve_path, rows_to_csv, run_sweep

SHORT = "[overrides]\nduration = 2.0\noutput_interval = 0.5\n"


def sweep_text(axes, base="paper-sinusoid-pcm", extra=SHORT):
    out = f'base = "{base}"\n{extra}'
    for parameter, values in axes:
        out += f'\n[[axes]]\nparameter = "{parameter}"\nvalues = {values!r}\n'
    return out


def test_cavity_axis_capacity_increases():
    sweep = parse_sweep(sweep_text([("cavity_thickness", [0.01, 0.02, 0.03, 0.04])]))
    rows = run_sweep(sweep, workers=1)
    assert len(rows) == 4
    caps = [r["enthalpy_capacity"] for r in rows]
    assert all(b > a for a, b in zip(caps, caps[1:]))
    assert all(r["error"] == "" for r in rows)


def test_two_axes_lexicographic():
    sweep = parse_sweep(sweep_text([("cavity_thickness", [0.01, 0.02, 0.03]),
                                    ("t_fusion", [34.0, 38.0, 42.0])]))
    rows = run_sweep(sweep, workers=1)
    assert [r["index"] for r in rows] == [f"{i}-{j}" for i in range(3) for j in range(3)]
    assert [(r["stack.cavity_thickness"], r["materials.pux-1500-20.t_fusion"]) for r in rows] == \
        [(c, t) for c in (0.01, 0.02, 0.03) for t in (34.0, 38.0, 42.0)]


def test_parallel_matches_serial_bitwise():
    sweep = parse_sweep(sweep_text([("cavity_thickness", [0.01, 0.02, 0.03])]))
    serial = rows_to_csv(sweep, run_sweep(sweep, workers=1))
    parallel = rows_to_csv(sweep, run_sweep(sweep, workers=3))
    assert serial == parallel
    assert serial == rows_to_csv(sweep, run_sweep(sweep, workers=1))


def test_failed_cell_is_marked_in_row():
    sweep = parse_sweep(sweep_text([("t_fusion", [38.0, 10.0, 40.0])]))
    rows = run_sweep(sweep, workers=1)
    assert rows[1]["error"].startswith(ERROR_MARKER)
    assert rows[1]["decrement_factor"] == ""
    assert rows[0]["error"] == "" and rows[2]["error"] == ""
    assert ERROR_MARKER in rows_to_csv(sweep, rows)


def test_empty_axis_is_config_error():
    with pytest.raises(ConfigError):
        parse_sweep(sweep_text([("cavity_thickness", [])]))


def test_no_axes_is_config_error():
    with pytest.raises(ConfigError):
        parse_sweep('base = "paper-sinusoid-pcm"\naxes = []\n')


def test_invalid_or_ambiguous_path():
    with pytest.raises(ConfigError, match="unknown parameter"):
        parse_sweep(sweep_text([("cavity_thicknes", [0.01])]))
    with pytest.raises(ConfigError, match="ambiguous"):
        parse_sweep(sweep_text([("k", [1.0])]))


def test_resolve_path_exact_and_suffix():
    doc = {"stack": {"cavity_thickness": 0.03}, "materials": {"a": {"rho": 1.0}}}
    assert resolve_path(doc, "stack.cavity_thickness") == "stack.cavity_thickness"
    assert resolve_path(doc, "rho") == "materials.a.rho"


def test_base_from_file(tmp_path):
    (tmp_path / "base.toml").write_text('preset = "paper-sinusoid-nopcm"\nduration = 1.0\n')
    sweep = parse_sweep('base = "base.toml"\noutput = "out.csv"\n[[axes]]\n'
                        'parameter = "cavity_thickness"\nvalues = [0.02]\n', tmp_path)
    assert sweep.output == tmp_path / "out.csv"
    assert sweep.base["duration"] == 1.0
