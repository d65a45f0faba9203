import math

import numpy as np
import pytest

from teichflow.config import ConfigError, parse_config, parse_pairs
from teichflow.flow import step_coupled
from teichflow.runner import initial_state, run_scenario
from teichflow.storage import COLUMNS, emit_series, load_checkpoint, read_series, write_checkpoint

BASE = "grid.nx = 16\ngrid.ny = 16\ninit.scenario = spiral\n"


def test_defaults_and_echo():
    cfg = parse_config(BASE)
    assert cfg.flow.dt == 1e-4 and cfg.flow.eta == 2.0 and cfg.cadence == 10
    echo = cfg.echo()
    assert echo["grid.nx"] == 16 and echo["flow.concentration_radii"] == [0.2, 0.1, 0.05]


def test_text_round_trip():
    cfg = parse_config(BASE + "teich.a = 0.25\nflow.t_end = 0.5\ninit.eps = 0.2\n")
    again = parse_config(cfg.to_text())
    assert again.values == cfg.values


def test_comments_and_blank_lines():
    cfg = parse_config("# header\n\n" + BASE.replace("spiral", "spiral  # inline"))
    assert cfg.scenario == "spiral"


@pytest.mark.parametrize(
    "text, match",
    [
        (BASE + "grid.nx = 8\n", r"line 4: duplicate key 'grid.nx' \(first set on line 1\)"),
        (BASE + "flow.foo = 1\n", "line 4: unknown key 'flow.foo'"),
        (BASE + "nonsense\n", "line 4: expected 'key = value'"),
        ("grid.nx = 16\ninit.scenario = spiral\n", "grid.ny: required key missing"),
        (BASE + "flow.dt = abc\n", "flow.dt: cannot parse"),
        (BASE + "flow.dt = -1\n", "flow.dt: dt must be positive"),
        (BASE + "teich.b = 0\n", "teich.b: TeichParams invalid"),
        (BASE.replace("spiral", "nope"), "init.scenario: unknown scenario"),
        (BASE + "target.name = klein\n", "target.name: unknown target"),
        (BASE.replace("16", "4", 1), "grid.nx: grid too coarse"),
        (BASE + "output.cadence = 0\n", "output.cadence"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_pairs_stay_strings():
    assert parse_pairs("grid.nx = 16\n") == {"grid.nx": "16"}


def test_overrides():
    cfg = parse_config(BASE).with_overrides(**{"flow.max_steps": 3, "seed": 7})
    assert cfg.flow.max_steps == 3 and cfg.seed == 7


def test_series_round_trip(tmp_path):
    rows = [{c: (i if c == "step" else 0.1 * i + 1 / 3) for c in COLUMNS} for i in range(3)]
    rows[0]["energy_identity_residual"] = float("nan")
    assert emit_series(tmp_path / "s.csv", rows) == 3
    back = read_series(tmp_path / "s.csv")
    assert back[1] == rows[1]
    assert math.isnan(back[0]["energy_identity_residual"])


def test_empty_series_has_header(tmp_path):
    emit_series(tmp_path / "e.csv", [])
    assert (tmp_path / "e.csv").read_text() == ",".join(COLUMNS) + "\n"
    assert read_series(tmp_path / "e.csv") == []


def test_checkpoint_round_trip_and_continuation(tmp_path):
    cfg = parse_config(BASE)
    s = initial_state(cfg)
    for _ in range(3):
        s = step_coupled(s, cfg.flow)
    write_checkpoint(tmp_path / "c.ckpt", s)
    r = load_checkpoint(tmp_path / "c.ckpt")
    assert np.array_equal(r.u, s.u) and np.array_equal(r.g.comps, s.g.comps)
    assert (r.t, r.step, r.E, r.teich) == (s.t, s.step, s.E, s.teich)
    a, b = s, r
    for _ in range(3):
        a, b = step_coupled(a, cfg.flow), step_coupled(b, cfg.flow)
    assert np.array_equal(a.u, b.u) and a.teich == b.teich


def test_checkpoint_torus_target(tmp_path):
    cfg = parse_config("grid.nx = 16\ngrid.ny = 16\ninit.scenario = wrap\ntarget.name = torus\n")
    s = initial_state(cfg)
    write_checkpoint(tmp_path / "t.ckpt", s)
    assert load_checkpoint(tmp_path / "t.ckpt").target == s.target


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "bad").write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError, match="not a checkpoint"):
        load_checkpoint(tmp_path / "bad")


def test_run_rows_follow_cadence(tmp_path):
    cfg = parse_config(BASE + "flow.max_steps = 25\noutput.cadence = 10\n")
    summary = run_scenario(cfg, out_dir=tmp_path)
    rows = read_series(tmp_path / "series.csv")
    assert [r["step"] for r in rows] == [0, 10, 20]
    assert summary.rows == 3 and summary.steps == 25
    assert (tmp_path / "summary.json").exists() and (tmp_path / "final.ckpt").exists()
    assert all(r1["E"] <= r0["E"] for r0, r1 in zip(rows, rows[1:]))


def test_run_stops_at_t_end(tmp_path):
    cfg = parse_config(BASE + "flow.max_steps = 100\nflow.t_end = 0.0005\n")
    assert run_scenario(cfg, out_dir=tmp_path).steps == 5


def test_runs_are_deterministic(tmp_path):
    cfg = parse_config(BASE + "flow.max_steps = 20\n")
    run_scenario(cfg, out_dir=tmp_path / "a")
    run_scenario(cfg, out_dir=tmp_path / "b")
    assert (tmp_path / "a" / "series.csv").read_bytes() == (tmp_path / "b" / "series.csv").read_bytes()
    assert (tmp_path / "a" / "final.ckpt").read_bytes() == (tmp_path / "b" / "final.ckpt").read_bytes()


def test_resume_from_checkpoint_matches_straight_run(tmp_path):
    cfg = parse_config(BASE + "flow.max_steps = 10\n")
    run_scenario(cfg, out_dir=tmp_path / "full")
    half = cfg.with_overrides(**{"flow.max_steps": 5})
    run_scenario(half, out_dir=tmp_path / "h1")
    resumed = load_checkpoint(tmp_path / "h1" / "final.ckpt")
    run_scenario(half, out_dir=tmp_path / "h2", state=resumed)
    assert (tmp_path / "h2" / "final.ckpt").read_bytes() == (tmp_path / "full" / "final.ckpt").read_bytes()
