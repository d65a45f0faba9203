import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teichflow.config import parse_config
from teichflow.flow import (
    GAP_FLOOR,
    FlowConfig,
    FlowError,
    dissipation,
    detect_concentration,
    dual_run_uniqueness,
    energy_identity_residual,
    gap_ratios,
    heat_solve,
    laplace_symbol,
    make_state,
    metric_velocity,
    step_coupled,
    wp_length,
)
from teichflow.grid import laplace_beltrami
from teichflow.metric import MetricField, TeichParams, build_grid
from teichflow.runner import initial_state, run_scenario
from teichflow.scenarios import constant_map, equator_map
from teichflow.storage import read_series
from teichflow.targets import Sphere


def config(body, n=32):
    return parse_config(f"grid.nx = {n}\ngrid.ny = {n}\n" + body)


def square(n=32, a=0.0, b=1.0):
    return MetricField.from_teich(build_grid(n, n), TeichParams(a, b))


def test_flow_config_validation():
    with pytest.raises(ValueError, match="^dt"):
        FlowConfig(dt=0.0)
    with pytest.raises(ValueError, match="^eta"):
        FlowConfig(eta=-1.0)
    with pytest.raises(ValueError, match="^metric_substep"):
        FlowConfig(metric_substep="other")
    assert FlowConfig(eta=0.0).eta == 0.0


@settings(max_examples=10, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(0.3, 3.0), st.floats(1e-5, 1e-2))
def test_heat_solve_inverts_operator(a, b, dt):
    g = square(16, a, b)
    rhs = np.random.default_rng(0).standard_normal((3, 16, 16))
    x = heat_solve(g, rhs, dt)
    assert np.max(np.abs(x - dt * laplace_beltrami(g, x) - rhs)) < 1e-10


def test_laplace_symbol_matches_operator():
    g = square(16, 0.3, 0.7)
    X, Y = g.grid.coords()
    sym = laplace_symbol(g.mean_tensor(), (16, 16))
    for m, n in ((1, 0), (2, -3), (0, 5)):
        mode = np.exp(2j * np.pi * (m * (X - X[0, 0]) + n * (Y - Y[0, 0])))
        lap = laplace_beltrami(g, mode.real) + 1j * laplace_beltrami(g, mode.imag)
        assert np.allclose(lap, sym[m % 16, n % 16] * mode, atol=1e-9)


def test_constant_map_is_fixed():
    g = square()
    u = constant_map(g.grid, Sphere())
    s = make_state(u, g, Sphere(), 2.0)
    cfg = FlowConfig(dt=1e-3)
    for _ in range(5):
        s = step_coupled(s, cfg)
    assert s.E == 0.0
    assert np.array_equal(s.u, u)
    assert s.teich == TeichParams(0.0, 1.0)


def test_metric_velocity_of_equator_map():
    g = square(64)
    V = metric_velocity(equator_map(g.grid), g, 2.0)
    # sinc^2 factor of the one-sided differences
    s = (math.sin(math.pi / 64) / (math.pi / 64)) ** 2
    c = 4 * math.pi ** 2 * s
    assert np.allclose(V[0], c, rtol=1e-12) and np.allclose(V[2], -c, rtol=1e-12)
    assert np.max(np.abs(V[1])) < 1e-10


@pytest.mark.parametrize("axis, sign", [("x", -1), ("y", 1)])
def test_equator_parameter_follows_ode(axis, sign):
    cfg = config(f"init.scenario = equator\ninit.axis = {axis}\nflow.dt = 1e-4\n", n=64)
    s = initial_state(cfg)
    for _ in range(100):
        s = step_coupled(s, cfg.flow)
    k = 4 * math.pi ** 2 * 0.01
    expected = 1 / (1 + k) if sign < 0 else 1 + k
    assert s.teich.b == pytest.approx(expected, rel=2e-3)
    assert s.teich.a == 0.0


def test_energy_identity_residual_small():
    cfg = config("init.scenario = spiral\n")
    s0 = initial_state(cfg)
    s1 = step_coupled(s0, cfg.flow, 1e-5)
    assert energy_identity_residual(s0, s1) < 1e-3 * dissipation(s0)


def test_wp_length_of_pairs():
    assert wp_length([(0.0, 3.0), (0.5, 3.0), (1.0, 3.0)]) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        wp_length([(0.0, 1.0)])


@pytest.mark.parametrize("axis", ["x", "y"])
def test_wp_length_of_equator_run(axis, tmp_path):
    cfg = config(f"init.scenario = equator\ninit.axis = {axis}\nflow.max_steps = 100\nflow.dt = 1e-4\n", n=64)
    summary = run_scenario(cfg, out_dir=tmp_path)
    # |dg/dt| = sqrt(2) eta^2 pi^2 b^{+-1} along the circle-map orbit
    exact = math.sqrt(2) / 2 * math.log(1 + 4 * math.pi ** 2 * 0.01)
    assert summary.wp_length == pytest.approx(exact, rel=1e-2)


def test_halted_state_refuses_to_step():
    cfg = config("init.scenario = equator\ninit.axis = y\nflow.systole_floor = 0.9\n")
    s = initial_state(cfg)
    while not s.halted:
        s = step_coupled(s, cfg.flow)
    assert s.events[-1].kind == "halt_systole"
    with pytest.raises(FlowError, match="halted"):
        step_coupled(s, cfg.flow)


def test_gap_ratios_ignore_floor():
    assert gap_ratios([1e-3, 1e-5, 1e-7]) == pytest.approx([1e-2, 1e-2])
    assert gap_ratios([1e-3, GAP_FLOOR / 2]) == []
    assert gap_ratios([GAP_FLOOR, GAP_FLOOR]) == []


def test_picard_gaps_contract_on_spiral():
    cfg = config("init.scenario = spiral\n")
    s = step_coupled(initial_state(cfg), cfg.flow)
    assert all(r <= 0.5 for r in gap_ratios(s.picard_gaps))
    assert s.picard_gaps[-1] < cfg.flow.picard_tol or len(s.picard_gaps) == cfg.flow.picard_iters


def test_concentration_flags_bump_only():
    cfg = config("init.scenario = bump\n", n=64)
    rep = detect_concentration(initial_state(cfg), cfg.flow)
    assert rep.bubble_suspected and len(rep.points) == 1
    x, y = rep.points[0].position
    assert abs(x - 0.5) < 0.05 and abs(y - 0.5) < 0.05
    assert rep.window is not None and rep.points[0].interpolation_ratio > 0
    g = square(64)
    flat = make_state(constant_map(g.grid, Sphere()), g, Sphere(), 2.0)
    assert detect_concentration(flat, cfg.flow).empty


def test_concentration_skips_radii_beyond_systole():
    g = square(64, 0.0, 0.1)
    s = make_state(equator_map(g.grid), g, Sphere(), 2.0)
    rep = detect_concentration(s, FlowConfig())
    assert rep.skipped_radii == (0.2,)
    assert rep.radii == (0.1, 0.05)
    with pytest.raises(ValueError, match="not embedded"):
        detect_concentration(s, FlowConfig(concentration_radii=(0.2,)))


def test_dual_run_zero_perturbation_is_exact():
    cfg = config("init.scenario = spiral\n")
    s0 = initial_state(cfg)
    for perturb in ("u", "b"):
        rep = dual_run_uniqueness(s0, cfg.flow, 0.0, 1e-3, perturb=perturb)
        assert rep.sup_w == 0.0 and rep.sup_param == 0.0
        assert rep.psi_integral > 0


def test_dual_run_parameter_perturbation_scales():
    cfg = config("init.scenario = spiral\n")
    s0 = initial_state(cfg)
    d = [dual_run_uniqueness(s0, cfg.flow, e, 1e-3, perturb="b").sup_param for e in (1e-3, 1e-4)]
    assert d[0] / d[1] == pytest.approx(10, rel=0.1)


def test_eta_zero_freezes_metric():
    cfg = config("init.scenario = spiral\nflow.eta = 0\n")
    s = initial_state(cfg)
    E0 = s.E
    for _ in range(10):
        s = step_coupled(s, cfg.flow)
    assert s.teich == TeichParams(0.0, 1.0)
    assert s.E < E0


@pytest.mark.parametrize("axis", ["x", "y"])
def test_equator_series_monotone(axis, tmp_path):
    cfg = config(f"init.scenario = equator\ninit.axis = {axis}\nflow.dt = 1e-5\nflow.max_steps = 200\noutput.cadence = 1\n")
    run_scenario(cfg, out_dir=tmp_path)
    rows = read_series(tmp_path / "series.csv")
    E = [r["E"] for r in rows]
    b = [r["b"] for r in rows]
    assert all(e1 < e0 for e0, e1 in zip(E, E[1:]))
    if axis == "x":
        assert all(b1 < b0 for b0, b1 in zip(b, b[1:]))
    else:
        assert all(b1 > b0 for b0, b1 in zip(b, b[1:]))
