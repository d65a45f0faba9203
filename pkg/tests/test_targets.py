import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teichflow.metric import MetricField, TeichParams, build_grid
from teichflow.scenarios import equator_map, spiral_map, wrap_map
from teichflow.targets import (
    OffManifoldError,
    Sphere,
    TargetManifold,
    TorusOfRevolution,
    make_target,
    normal_component,
    sphere_tension_closed_form,
    tension_field,
)

angles = st.floats(0.0, 2 * math.pi)
small = st.floats(-0.2, 0.2)
vec = st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))


def col(*xs):
    return np.array(xs, dtype=float)[:, None, None]


def test_sphere_projection_and_form():
    s = Sphere()
    assert np.allclose(s.project(col(2.0, 0.0, 0.0))[:, 0, 0], [1.0, 0.0, 0.0])
    p = col(0.0, 0.0, 1.0)
    v, w = col(1.0, 2.0, 0.0), col(3.0, -1.0, 0.0)
    assert np.allclose(s.second_fundamental_form(p, v, w)[:, 0, 0], [0.0, 0.0, -1.0])
    assert s.distance(col(0.0, 3.0, 0.0))[0, 0] == pytest.approx(2.0)


def test_sphere_rejects_origin_and_far_points():
    s = Sphere()
    with pytest.raises(OffManifoldError):
        s.project(col(0.0, 0.0, 0.0))
    with pytest.raises(OffManifoldError, match="tolerance band"):
        s.project(col(0.0, 0.0, 2.5))


def test_numerical_hessian_matches_sphere_closed_form():
    s = Sphere()
    rng = np.random.default_rng(3)
    p = rng.standard_normal((3, 8, 8))
    p /= np.sqrt(np.sum(p * p, axis=0))
    v = rng.standard_normal((3, 8, 8))
    v -= np.sum(v * p, axis=0) * p
    generic = TargetManifold.second_fundamental_form(s, p, v)
    assert np.max(np.abs(generic - s.second_fundamental_form(p, v))) < 1e-8


@pytest.mark.parametrize("ab", [(0.0, 1.0), (0.3, 0.8)])
def test_sphere_tension_matches_closed_form(ab):
    g = MetricField.from_teich(build_grid(32, 32), TeichParams(*ab))
    u = spiral_map(g.grid, 0.3)
    diff = tension_field(Sphere(), u, g) - sphere_tension_closed_form(u, g)
    assert np.max(np.abs(diff)) < 1e-12 * (1 + np.max(np.abs(u)))


def test_equator_map_is_harmonic():
    g = MetricField.from_teich(build_grid(32, 32), TeichParams(0.0, 1.0))
    assert np.max(np.abs(tension_field(Sphere(), equator_map(g.grid), g))) < 1e-9


def test_sphere_tension_is_tangent():
    # u . D+D- u = -(|D+ u|^2 + |D- u|^2) / 2 holds exactly for unit vectors
    g = MetricField.from_teich(build_grid(64, 64), TeichParams(0.2, 0.9))
    X, Y = g.grid.coords()
    u = Sphere().project(np.array([np.cos(2 * np.pi * X), np.sin(2 * np.pi * X), 0.5 * np.sin(2 * np.pi * Y)]))
    assert np.max(normal_component(Sphere(), u, tension_field(Sphere(), u, g))) < 1e-8


def test_torus_tension_tangency_is_second_order():
    T = TorusOfRevolution()
    errs = []
    for n in (32, 64, 128):
        g = MetricField.from_teich(build_grid(n, n), TeichParams(0.2, 0.9))
        X, Y = g.grid.coords()
        u = T.embed(2 * np.pi * X + 0.3 * np.sin(2 * np.pi * Y), 2 * np.pi * Y + 0.2 * np.cos(2 * np.pi * X))
        errs.append(np.max(normal_component(T, u, tension_field(T, u, g))))
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(rates) > 1.9


def test_torus_curvatures_at_outer_equator():
    T = TorusOfRevolution()
    p = col(T.R + T.r, 0.0, 0.0)
    tube = T.second_fundamental_form(p, col(0.0, 0.0, 1.0))[:, 0, 0]
    ring = T.second_fundamental_form(p, col(0.0, 1.0, 0.0))[:, 0, 0]
    assert np.allclose(tube, [-1.0 / T.r, 0.0, 0.0], atol=1e-8)
    assert np.allclose(ring, [-1.0 / (T.R + T.r), 0.0, 0.0], atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(angles, angles, small, small, small)
def test_torus_projection_idempotent(s, t, dx, dy, dz):
    T = TorusOfRevolution()
    p = T.embed(np.array([[s]]), np.array([[t]])) + col(dx, dy, dz)
    q = T.project(p)
    assert T.distance(q)[0, 0] < 1e-12
    assert np.allclose(T.project(q), q, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(angles, angles, vec, vec, st.floats(-3, 3))
def test_torus_form_symmetric_and_quadratic(s, t, v, w, c):
    T = TorusOfRevolution()
    p = T.embed(np.array([[s]]), np.array([[t]]))
    v, w = col(*v), col(*w)
    avw = T.second_fundamental_form(p, v, w)
    awv = T.second_fundamental_form(p, w, v)
    scale = 1 + np.sum(v * v) + np.sum(w * w)
    assert np.allclose(avw, awv, atol=1e-7 * scale)
    assert np.allclose(T.second_fundamental_form(p, c * v), c * c * T.second_fundamental_form(p, v), atol=1e-7 * scale * (1 + c * c))


def test_torus_rejects_axis_points():
    T = TorusOfRevolution()
    with pytest.raises(OffManifoldError):
        T.project(col(0.0, 0.0, 0.1))


def test_torus_invalid_radii():
    with pytest.raises(ValueError, match="band < r < R"):
        TorusOfRevolution(R=1.0, r=2.0)


def test_wrap_map_tension_is_tangent():
    T = make_target("torus")
    g = MetricField.from_teich(build_grid(64, 64), TeichParams(0.0, 1.0))
    u = wrap_map(g.grid, T)
    tau = tension_field(T, u, g)
    assert np.max(normal_component(T, u, tau)) < 1e-2 * np.max(np.abs(tau))


def test_make_target_unknown():
    with pytest.raises(ValueError, match="unknown target"):
        make_target("klein")


def test_spiral_tension_closed_form():
    # u = (cos th, sin th, 0) with th = 2 pi x + 0.1 sin 2 pi x has tension th'' (-sin th, cos th, 0)
    errs = []
    for n in (32, 64, 128):
        g = MetricField.from_teich(build_grid(n, n), TeichParams(0.0, 1.0))
        X, _ = g.grid.coords()
        th = 2 * np.pi * X + 0.1 * np.sin(2 * np.pi * X)
        exact = -0.4 * np.pi ** 2 * np.sin(2 * np.pi * X) * np.array([-np.sin(th), np.cos(th), 0 * th])
        errs.append(np.max(np.abs(tension_field(Sphere(), spiral_map(g.grid, 0.1), g) - exact)))
    assert errs[-1] < 1e-2
    assert min(math.log2(a / b) for a, b in zip(errs, errs[1:])) > 1.9
