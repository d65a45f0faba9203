"""Named initial maps."""

from __future__ import annotations

import numpy as np

from .metric import Grid, TeichParams
from .targets import Sphere, TargetManifold, TorusOfRevolution

SCENARIOS = ("constant", "equator", "spiral", "bump", "wrap", "file")


def circle_map(theta: np.ndarray) -> np.ndarray:
    """``(cos theta, sin theta, 0)``: a map onto the equator of the unit sphere."""
    return np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)])


def _need_sphere(target, name):
    if not isinstance(target, Sphere) or target.K != 3:
        raise ValueError(f"scenario {name!r} needs the unit sphere S^2 as target")


def equator_map(grid: Grid, axis: str = "x") -> np.ndarray:
    X, Y = grid.coords()
    if axis == "x":
        return circle_map(2 * np.pi * X)
    if axis == "y":
        return circle_map(2 * np.pi * Y)
    raise ValueError(f"equator axis must be 'x' or 'y', got {axis!r}")


def spiral_map(grid: Grid, eps: float = 0.1) -> np.ndarray:
    X, _ = grid.coords()
    return circle_map(2 * np.pi * X + eps * np.sin(2 * np.pi * X))


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def bump_map(
    grid: Grid,
    teich: TeichParams,
    center=(0.5, 0.5),
    radius: float = 0.05,
    scale: float = 0.02,
) -> np.ndarray:
    """Degree-one bubble squeezed into the metric ball ``B_radius(center)``.

    In the conformal coordinate ``z = (dx + omega dy) / sqrt(b)`` the map is
    inverse stereographic projection of ``z / (scale * c(|z|))``, where the
    cutoff ``c`` is one on the inner half of the ball and reaches zero at its
    rim.  The whole sphere is covered inside the ball and the map is constant
    (north pole) outside, so the energy is at least ``4 pi``.
    """
    X, Y = grid.coords()
    dx = X - center[0]
    dy = Y - center[1]
    dx -= np.round(dx)
    dy -= np.round(dy)
    z = (dx + teich.omega * dy) / np.sqrt(teich.b)
    rho = np.abs(z)
    c = 1.0 - _smoothstep(2.0 * rho / radius - 1.0)
    inside = c > 0
    w = np.zeros_like(z)
    w[inside] = z[inside] / (scale * c[inside])
    q = np.abs(w) ** 2
    u = np.stack([2 * w.real / (1 + q), 2 * w.imag / (1 + q), (q - 1) / (1 + q)])
    u[:, ~inside] = np.array([0.0, 0.0, 1.0])[:, None]
    return u


def wrap_map(grid: Grid, target: TorusOfRevolution) -> np.ndarray:
    """Degree-one map of the flat torus onto the torus of revolution."""
    X, Y = grid.coords()
    return target.embed(2 * np.pi * X, 2 * np.pi * Y)


def constant_map(grid: Grid, target: TargetManifold) -> np.ndarray:
    if isinstance(target, TorusOfRevolution):
        p = target.embed(np.zeros(1), np.zeros(1))[:, 0]
    else:
        p = np.zeros(target.K)
        p[-1] = 1.0
    return np.broadcast_to(p[:, None, None], (target.K,) + grid.shape).copy()


def initial_map(name: str, grid: Grid, target: TargetManifold, teich: TeichParams, **params) -> np.ndarray:
    """Build the named initial map, projected onto the target."""
    if name == "constant":
        u = constant_map(grid, target)
    elif name == "equator":
        _need_sphere(target, name)
        u = equator_map(grid, params.get("axis", "x"))
    elif name == "spiral":
        _need_sphere(target, name)
        u = spiral_map(grid, params.get("eps", 0.1))
    elif name == "bump":
        _need_sphere(target, name)
        kw = {k: params[k] for k in ("center", "radius", "scale") if k in params}
        u = bump_map(grid, teich, **kw)
    elif name == "wrap":
        if not isinstance(target, TorusOfRevolution):
            raise ValueError("scenario 'wrap' needs the torus of revolution as target")
        u = wrap_map(grid, target)
    elif name == "file":
        path = params.get("path")
        if not path:
            raise ValueError("scenario 'file' needs init.path")
        u = np.load(path)
        if u.shape != (target.K,) + grid.shape:
            raise ValueError(f"shape mismatch: {path} holds {u.shape}, expected {(target.K,) + grid.shape}")
    else:
        raise ValueError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")
    return target.project(u)
