"""Cycle CSV round-trips, synthetic generation, TOML configuration."""

import dataclasses

import numpy as np
import pytest

from preheatsim import (CycleDefaults, CycleFormatError, DpGrid, State,
                        SynthSpec, default_cycle, energy_report, load_config,
                        load_cycle, plan_preheat, save_cycle, synth_cycle)
from preheatsim.cycle_io import COLUMNS, load_limit_table


def _write(path, text):
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# load_cycle
# ---------------------------------------------------------------------------

def test_two_fencepost_rows_make_one_step(tmp_path):
    p = _write(tmp_path / "c.csv", "time_s,p_prop_w\n0,15000\n30,15000\n")
    cyc = load_cycle(p)
    assert cyc.n_steps == 1
    assert cyc.dt == 30.0
    assert cyc.p_prop[0] == 15000.0


def test_missing_columns_fall_back_to_defaults(tmp_path):
    p = _write(tmp_path / "c.csv", "time_s,p_prop_w\n0,1\n30,2\n60,3\n")
    cyc = load_cycle(p)
    assert np.all(cyc.p_aux == 500.0)
    assert np.all(cyc.p_hvch_cabin == 1978.0)
    assert np.all(cyc.t_amb == -7.0)
    assert np.all(cyc.gamma == 35.0)
    assert np.all(cyc.speed == 0.0)
    custom = load_cycle(p, CycleDefaults(p_aux_w=123.0, t_amb_c=-20.0))
    assert np.all(custom.p_aux == 123.0)
    assert np.all(custom.t_amb == -20.0)


def test_blank_lines_are_tolerated(tmp_path):
    p = _write(tmp_path / "c.csv",
               "time_s,p_prop_w\n0,1\n\n30,2\n , \n60,3\n")
    assert load_cycle(p).n_steps == 2


@pytest.mark.parametrize("text, line, match", [
    ("", None, "empty file; expected a header row"),
    ("time_s,bogus\n0,1\n30,2\n", 1, r"unknown column\(s\) \['bogus'\]"),
    ("p_prop_w\n1\n2\n", 1, "missing required column 'time_s'"),
    ("time_s,speed_mps\n0,1\n30,2\n", 1, "missing required column 'p_prop_w'"),
    ("time_s,p_prop_w,p_prop_w\n0,1,1\n30,2,2\n", 1, "duplicate column names"),
    ("time_s,p_prop_w\n0,1,7\n30,2\n", 2, "expected 2 cells, found 3"),
    ("time_s,p_prop_w\n0,1\n30,abc\n", 3, "non-numeric cell"),
    ("time_s,p_prop_w\n0,1\n30,inf\n", 3, "non-finite value in 'p_prop_w'"),
    ("time_s,p_prop_w\nnan,1\n30,2\n", 2, "non-finite value in 'time_s'"),
    ("time_s,p_prop_w\n0,1\n", None, r"need at least 2 data rows \(got 1\)"),
    ("time_s,p_prop_w\n0,1\n-30,2\n", 3, "time_s must be strictly increasing"),
    ("time_s,p_prop_w\n0,1\n30,2\n60,3\n91,4\n", 5, "non-uniform time axis"),
])
def test_malformed_cycle_files(tmp_path, text, line, match):
    p = _write(tmp_path / "bad.csv", text)
    with pytest.raises(CycleFormatError, match=match) as exc:
        load_cycle(p)
    assert exc.value.line == line
    if line is not None:
        assert str(exc.value).startswith(f"line {line}: ")


def test_save_then_load_round_trips_bit_for_bit(tmp_path):
    cyc = default_cycle()
    p = tmp_path / "cycle.csv"
    save_cycle(cyc, p)
    assert p.read_text().splitlines()[0] == ",".join(COLUMNS)
    back = load_cycle(p)
    assert back.dt == cyc.dt
    assert back.n_steps == cyc.n_steps
    for name in ("speed", "p_prop", "p_aux", "p_hvch_cabin", "t_amb", "gamma"):
        assert np.array_equal(getattr(back, name), getattr(cyc, name)), name


# ---------------------------------------------------------------------------
# synthetic cycles
# ---------------------------------------------------------------------------

def test_synth_cycle_is_deterministic_and_calibrated():
    spec = SynthSpec()
    a = synth_cycle(spec)
    b = synth_cycle(spec)
    assert np.array_equal(a.p_prop, b.p_prop)
    assert np.array_equal(a.speed, b.speed)
    assert a.n_steps == 120
    assert a.dt == 30.0
    assert abs(a.p_prop.mean() - 18e3) <= 0.02 * 18e3
    assert a.p_prop.min() >= spec.p_prop_min_w
    assert a.p_prop.max() <= spec.p_prop_max_w
    for name, value in (("p_aux", spec.p_aux_w),
                        ("p_hvch_cabin", spec.p_hvch_cabin_w),
                        ("t_amb", spec.t_amb_c),
                        ("gamma", spec.gamma_w_per_k)):
        assert np.all(getattr(a, name) == value), name


def test_different_seeds_give_different_profiles():
    a = synth_cycle(SynthSpec(seed=1))
    b = synth_cycle(SynthSpec(seed=2))
    assert not np.array_equal(a.p_prop, b.p_prop)


def test_twenty_kw_mean_cycle_draws_about_24_kwh(params):
    # A winter hour at 20 kW mean propulsion, preheated to 25 degC, should
    # draw roughly 24 kWh from the pack — the consumption class the
    # generator's road-load shape is scaled for.
    cyc = synth_cycle(SynthSpec(mean_prop_kw=20.0))
    plan = plan_preheat(params, cyc, State(soc=0.9, tb=-7.0), 25.0, 0.6)
    total = energy_report(plan.trajectory, params, cyc).total_battery_wh
    assert 0.9 * 24e3 <= total <= 1.1 * 24e3


@pytest.mark.parametrize("kwargs, match", [
    ({"dt_s": 0.0}, "must be positive"),
    ({"duration_s": -1.0}, "must be positive"),
    ({"duration_s": 10.0}, "shorter than one sample"),
    ({"mean_prop_kw": 0.0}, "must be positive"),
])
def test_synth_spec_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        synth_cycle(dataclasses.replace(SynthSpec(), **kwargs))


# ---------------------------------------------------------------------------
# capability tables
# ---------------------------------------------------------------------------

def test_limit_table_layout_is_transposed_to_soc_major(tmp_path):
    p = _write(tmp_path / "t.csv",
               ",0.05,1.0\n-30,10.0,30.0\n45,20.0,40.0\n")
    soc, tb, table = load_limit_table(p)
    assert np.array_equal(soc, [0.05, 1.0])
    assert np.array_equal(tb, [-30.0, 45.0])
    # file rows are temperatures; in memory the first axis is soc
    assert table[1, 0] == 30.0
    assert table[0, 1] == 20.0
    assert table.shape == (2, 2)


def test_limit_table_rejects_bad_shapes_and_cells(tmp_path):
    with pytest.raises(ValueError, match="needs knots plus a body"):
        load_limit_table(_write(tmp_path / "a.csv", ",0.05,1.0\n"))
    with pytest.raises(ValueError, match="ragged capability table"):
        load_limit_table(_write(tmp_path / "b.csv",
                                ",0.05,0.5,1.0\n-30,1,2\n45,3,4\n"))
    with pytest.raises(ValueError, match="non-numeric cell"):
        load_limit_table(_write(tmp_path / "c.csv",
                                ",0.05,1.0\n-30,1,x\n45,3,4\n"))


# ---------------------------------------------------------------------------
# TOML configuration
# ---------------------------------------------------------------------------

def test_empty_config_gives_defaults(tmp_path):
    cfg = load_config(_write(tmp_path / "c.toml", ""))
    assert cfg.params.p_hvch_max == 6000.0
    assert cfg.dp == DpGrid()
    assert cfg.cycle_defaults == CycleDefaults()


def test_vehicle_dp_and_cycle_default_overrides(tmp_path):
    cfg = load_config(_write(tmp_path / "c.toml", """\
[vehicle]
p_hvch_max = 2500.0
uoc_soc = [0.0, 1.0]
uoc_volts = [340.0, 420.0]

[dp]
n_soc = 31

[cycle-defaults]
p_aux_w = 250.0
"""))
    assert cfg.params.p_hvch_max == 2500.0
    assert np.array_equal(cfg.params.uoc_soc, [0.0, 1.0])
    assert np.array_equal(cfg.params.uoc_volts, [340.0, 420.0])
    assert cfg.dp.n_soc == 31
    assert cfg.dp.n_tb == DpGrid().n_tb
    assert cfg.cycle_defaults.p_aux_w == 250.0


def test_inline_limit_tables(tmp_path):
    cfg = load_config(_write(tmp_path / "c.toml", """\
[limits]
soc_knots = [0.05, 1.0]
tb_knots = [-30.0, 45.0]
dchg_max_w = [[1000.0, 2000.0], [3000.0, 6000.0]]
chg_min_w = [[-2000.0, -4000.0], [-1000.0, -2000.0]]
"""))
    assert np.array_equal(cfg.params.limit_soc, [0.05, 1.0])
    assert np.array_equal(cfg.params.limit_tb, [-30.0, 45.0])
    assert np.array_equal(cfg.params.dchg_max_w, [[1e3, 2e3], [3e3, 6e3]])
    assert np.array_equal(cfg.params.chg_min_w, [[-2e3, -4e3], [-1e3, -2e3]])


def test_limit_tables_from_files_resolve_relative_paths(tmp_path):
    # file rows are temperatures, so these transpose into the same tables
    # the inline test uses
    _write(tmp_path / "dchg.csv", ",0.05,1.0\n-30,1000,3000\n45,2000,6000\n")
    _write(tmp_path / "chg.csv", ",0.05,1.0\n-30,-2000,-1000\n45,-4000,-2000\n")
    cfg = load_config(_write(tmp_path / "c.toml", """\
[limits]
dchg_table = "dchg.csv"
chg_table = "chg.csv"
"""))
    assert np.array_equal(cfg.params.dchg_max_w, [[1e3, 2e3], [3e3, 6e3]])
    assert np.array_equal(cfg.params.chg_min_w, [[-2e3, -4e3], [-1e3, -2e3]])


def test_limit_table_files_must_share_knots(tmp_path):
    _write(tmp_path / "dchg.csv", ",0.05,1.0\n-30,1000,3000\n45,2000,6000\n")
    _write(tmp_path / "chg.csv", ",0.1,1.0\n-30,-2000,-1000\n45,-4000,-2000\n")
    cfg = _write(tmp_path / "c.toml",
                 '[limits]\ndchg_table = "dchg.csv"\nchg_table = "chg.csv"\n')
    with pytest.raises(ValueError, match="share their knots"):
        load_config(cfg)


@pytest.mark.parametrize("text, match", [
    ("[vehicle]\nuoc_soc = [0.0, 1.0]\n",
     "uoc_soc and uoc_volts must be given together"),
    ('[limits]\ndchg_table = "dchg.csv"\n',
     "dchg_table and chg_table must be given together"),
    ("[limits]\nsoc_knots = [0.05, 1.0]\n", r"\[limits\] needs exactly"),
    ("[vehicle]\nwheel_count = 4\n", r"unknown key\(s\) in \[vehicle\]"),
    ("[dp]\nfancy = true\n", r"unknown key\(s\) in \[dp\]"),
    ("[typo]\nx = 1\n", r"unknown config section\(s\): \['typo'\]"),
])
def test_config_rejections(tmp_path, text, match):
    p = _write(tmp_path / "c.toml", text)
    with pytest.raises(ValueError, match=match):
        load_config(p)
