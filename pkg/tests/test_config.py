import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcmwall.assembly import ConstantTemperature, Sinusoidal
from pcmwall.config import (
    ConfigError,
    HollowBrick,
    load_config,
    parse_config,
    preset_names,
    serialize_config,
)
from pcmwall.materials import PUX_1500_20, PcmMaterial

MINIMAL = """
[stack]
shell_thickness = 0.01
cavity_thickness = 0.03
fill = "air"

[boundary]
kind = "sinusoidal"
offset = 32.5
amplitude = 17.5
period = 24.0
phase = -1.5707963267948966
"""


def test_presets_shipped():
    assert {"paper-sinusoid-pcm", "paper-sinusoid-nopcm", "paper-hotplate-80c",
            "paper-hotplate-80c-air", "paper-hotplate-50c"} <= set(preset_names())


def test_preset_id_fully_populated():
    cfg = parse_config("paper-sinusoid-pcm")
    assert cfg.name == "paper-sinusoid-pcm"
    assert isinstance(cfg.boundary, Sinusoidal)
    assert (cfg.boundary.offset, cfg.boundary.amplitude, cfg.boundary.period) == (32.5, 17.5, 24.0)
    assert cfg.materials["pux-1500-20"] == PUX_1500_20
    assert set(cfg.materials) == {"pux-1500-20", "brick", "cement"}
    assert cfg.duration == 30.0 and cfg.initial_temperature == 15.0
    assert cfg.metrics.period == 24.0 and cfg.metrics.window == (0.0, 24.0)
    assert cfg.build_stack().total_thickness == pytest.approx(0.06)


def test_defaults_applied():
    cfg = parse_config(MINIMAL)
    assert cfg.duration == 30.0
    assert cfg.output_interval == 0.1
    assert cfg.probes.positions == (0.0, 0.25, 0.5, 0.75, 1.0)
    assert cfg.solver.dt == pytest.approx(1 / 60)
    assert cfg.stack == HollowBrick(0.01, 0.03, 0.0, "air")


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="thicknes"):
        parse_config(MINIMAL.replace("[boundary]", "thicknes = 3\n[boundary]"))
    with pytest.raises(ConfigError, match="thicknes"):
        parse_config(MINIMAL + "\n[solver]\nthicknes = 1\n")


def test_syntax_error_has_line_and_column():
    with pytest.raises(ConfigError, match=r"line 3, column"):
        parse_config("name = 'x'\n\nduration = = 3\n")


def test_unresolved_material():
    with pytest.raises(ConfigError, match="unobtainium"):
        parse_config(MINIMAL.replace('"air"', '"unobtainium"'))


@pytest.mark.parametrize("extra", [
    "duration = 0.05\noutput_interval = 0.1\n",
    "output_interval = 0.01\n",
    "duration = -1.0\n",
])
def test_invariant_violations(extra):
    with pytest.raises(ConfigError):
        parse_config(extra + MINIMAL)


def test_preset_inheritance_with_override():
    cfg = parse_config('preset = "paper-sinusoid-pcm"\nduration = 48.0\n'
                       '[materials.pux-1500-20]\nt_fusion = 35.0\n')
    assert cfg.duration == 48.0
    assert cfg.materials["pux-1500-20"].t_fusion == 35.0
    assert cfg.materials["pux-1500-20"].h_fusion == 91000.0


def test_inline_material_and_explicit_layers():
    text = """
[materials.wax]
kind = "pcm"
k_semicrystalline = 0.2
k_amorphous = 0.15
rho = 800.0
cp_semicrystalline = 2000.0
cp_amorphous = 2200.0
t_fusion = 28.0
t_crystallization = 24.0
h_fusion = 150000.0
h_crystallization = 145000.0

[stack]
kind = "layers"
layers = [{material = "brick", thickness = 0.02}, {material = "wax", thickness = 0.01}]

[boundary]
kind = "constant"
value = 50.0
duration = 6.5
"""
    cfg = parse_config(text)
    wax = cfg.materials["wax"]
    assert isinstance(wax, PcmMaterial) and wax.delta_t_transition == 2.0
    assert [l.material.name for l in cfg.build_stack().layers] == ["brick", "wax"]
    assert cfg.boundary == ConstantTemperature(50.0, 6.5, 20.0)
    assert cfg.initial_temperature == 20.0
    assert cfg.metrics.period is None
    assert parse_config(serialize_config(cfg)) == cfg


def test_incomplete_new_material():
    with pytest.raises(ConfigError, match="rho"):
        parse_config(MINIMAL + '\n[materials.foam]\nkind = "solid"\nk = 0.04\ncp = 1400.0\n')


@pytest.mark.parametrize("name", preset_names())
def test_round_trip_fixed_point(name):
    cfg = load_config(name)
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert serialize_config(again) == text


def test_infinite_duration_round_trips():
    cfg = parse_config(MINIMAL.replace('kind = "sinusoidal"\noffset = 32.5\namplitude = 17.5\n'
                                       'period = 24.0\nphase = -1.5707963267948966',
                                       'kind = "constant"\nvalue = 40.0'))
    assert math.isinf(cfg.boundary.duration)
    assert parse_config(serialize_config(cfg)) == cfg


@settings(max_examples=40, deadline=None)
@given(st.floats(0.001, 0.04), st.floats(0.0, 0.02), st.floats(25.0, 45.0),
       st.floats(0.1, 4.0), st.floats(0.0, 0.5))
def test_round_trip_property(cavity, skin, t_fusion, delta, rc):
    text = (f'preset = "paper-sinusoid-pcm"\n[stack]\ncavity_thickness = {cavity!r}\n'
            f'skin_thickness = {skin!r}\n[solver]\ncontact_resistance = {rc!r}\n'
            f'[materials.pux-1500-20]\nt_fusion = {t_fusion!r}\ndelta_t_transition = {delta!r}\n')
    try:
        cfg = parse_config(text)
    except ConfigError:
        return  # e.g. a transition window that overlaps crystallization
    assert parse_config(serialize_config(cfg)) == cfg


def test_load_config_from_file(tmp_path):
    path = tmp_path / "s.toml"
    path.write_text(MINIMAL)
    assert load_config(path) == parse_config(MINIMAL)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
