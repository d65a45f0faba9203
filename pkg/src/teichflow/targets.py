"""Target manifolds N embedded in R^K.

A target supplies its closest-point projection ``Pi``; the second fundamental
form is the second derivative of ``Pi`` along tangent directions,
``A(p)(v, w) = D^2 Pi(p)[v, w]``.  The unit sphere has closed forms for both,
the torus of revolution uses a closed-form ``Pi`` and a numerical Hessian.

With this sign convention ``A(p)(v, v) = -|v|^2 p`` on the unit sphere, and
the tension field is ``tau = Delta u - g^{ij} A(u)(d_i u, d_j u)``.  The
second term is what :func:`second_fundamental_term` returns, so that
``tau = Delta u + second_fundamental_term``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import laplace_beltrami, one_sided_gradients
from .metric import MetricField


class OffManifoldError(ValueError):
    """A point lies outside the tolerance band of the target."""


HESSIAN_STEP = 1e-5


@dataclass(frozen=True)
class TargetManifold:
    """Base class; subclasses implement ``_closest`` and ``_distance``."""

    K: int
    band: float

    name = "target"

    def _closest(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _distance(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _degenerate(self, p: np.ndarray) -> np.ndarray:
        """Cells where ``Pi`` is undefined (no unique closest point)."""
        return np.zeros(p.shape[1:], dtype=bool)

    def _check_shape(self, p: np.ndarray):
        if p.shape[0] != self.K:
            raise ValueError(f"shape mismatch: expected {self.K} ambient components, got {p.shape[0]}")

    def distance(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        self._check_shape(p)
        return self._distance(p)

    def project(self, p, check: bool = True) -> np.ndarray:
        """Closest point on N; ``p`` has the ambient axis first."""
        p = np.asarray(p, dtype=float)
        self._check_shape(p)
        if check:
            d = self._distance(p)
            bad = ~(d <= self.band) | self._degenerate(p)
            if np.any(bad):
                worst = float(np.max(np.where(np.isfinite(d), d, np.inf)))
                raise OffManifoldError(
                    f"point outside the tolerance band of {self.name} (distance {worst:.3e} > {self.band})"
                )
        return self._closest(p)

    def second_fundamental_form(self, p: np.ndarray, v: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
        """``A(p)(v, w) = D^2 Pi(p)[v, w]`` by a numerical Hessian with step ``HESSIAN_STEP``.

        ``w=None`` evaluates the quadratic form ``A(p)(v, v)``.  The inner
        derivative ``DPi(q)[v]`` is taken by complex step, so the only
        cancellation is the outer centred difference (relative rounding noise
        near ``1e-11`` instead of ``1e-6`` for a plain second difference).
        """
        if w is not None:
            # polarisation keeps the evaluation to quadratic forms only
            return 0.25 * (self.second_fundamental_form(p, v + w) - self.second_fundamental_form(p, v - w))
        norm = np.sqrt(np.sum(v * v, axis=0))
        vhat = v / np.where(norm > 0, norm, 1.0)
        e = HESSIAN_STEP * vhat
        d2 = (self._directional(p + e, vhat) - self._directional(p - e, vhat)) / (2 * HESSIAN_STEP)
        return d2 * norm ** 2

    def _directional(self, q: np.ndarray, v: np.ndarray) -> np.ndarray:
        """``DPi(q)[v]`` by complex step; ``_closest`` must be written with analytic operations."""
        h = 1e-30
        return np.imag(self._closest(q + 1j * h * v)) / h

    def check_on_manifold(self, u: np.ndarray, tol: float):
        d = self.distance(u)
        if np.max(d) > tol:
            raise OffManifoldError(f"map is off the target: max distance {np.max(d):.3e} > {tol:.1e}")


@dataclass(frozen=True)
class Sphere(TargetManifold):
    """Unit sphere ``S^{K-1}`` in ``R^K``."""

    K: int = 3
    band: float = 1.0

    name = "sphere"

    def _distance(self, p):
        return np.abs(np.sqrt(np.sum(p * p, axis=0)) - 1.0)

    def _degenerate(self, p):
        return np.sum(p * p, axis=0) == 0.0

    def _closest(self, p):
        return p / np.sqrt(np.sum(p * p, axis=0))

    def second_fundamental_form(self, p, v, w=None):
        w = v if w is None else w
        return -np.sum(v * w, axis=0) * p


@dataclass(frozen=True)
class TorusOfRevolution(TargetManifold):
    """Torus in ``R^3`` with major radius ``R`` about the z-axis and minor radius ``r``."""

    K: int = 3
    band: float = 0.4
    R: float = 2.0
    r: float = 0.5

    name = "torus of revolution"

    def __post_init__(self):
        if not (0 < self.r < self.R) or not (0 < self.band < self.r):
            raise ValueError("torus of revolution needs 0 < band < r < R")

    def _core(self, p):
        # analytic in p, so that complex-step derivatives go through
        rho = np.sqrt(p[0] ** 2 + p[1] ** 2)
        return rho, np.stack([self.R * p[0] / rho, self.R * p[1] / rho, np.zeros_like(rho)])

    def _distance(self, p):
        rho = np.sqrt(p[0] ** 2 + p[1] ** 2)
        return np.abs(np.hypot(rho - self.R, p[2]) - self.r)

    def _degenerate(self, p):
        rho = np.sqrt(p[0] ** 2 + p[1] ** 2)
        return (rho == 0.0) | (np.hypot(rho - self.R, p[2]) == 0.0)

    def _closest(self, p):
        _, c = self._core(p)
        d = p - c
        return c + self.r * d / np.sqrt(np.sum(d * d, axis=0))

    def embed(self, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Point with angles ``s`` (around the z-axis) and ``t`` (around the core circle)."""
        rad = self.R + self.r * np.cos(t)
        return np.stack([rad * np.cos(s), rad * np.sin(s), self.r * np.sin(t)])


def make_target(name: str, **params) -> TargetManifold:
    if name == "sphere":
        return Sphere(**params)
    if name in ("torus", "torus_of_revolution"):
        return TorusOfRevolution(**params)
    raise ValueError(f"unknown target {name!r}")


def second_fundamental_parts(target: TargetManifold, u: np.ndarray) -> np.ndarray:
    """``A(u)(d_i u, d_j u)`` for ``(ij) = (11, 12, 22)`` and both one-sided gradients.

    Shape ``(2, 3, K, nx, ny)``.  Depends on ``u`` only, so a solver that tries
    several metrics for one map evaluates the Hessian once.
    """
    target._check_shape(u)
    parts = []
    for ux, uy in one_sided_gradients(u):
        if isinstance(target, Sphere):
            parts.append([target.second_fundamental_form(u, a, c) for a, c in ((ux, ux), (ux, uy), (uy, uy))])
            continue
        axx = target.second_fundamental_form(u, ux)
        ayy = target.second_fundamental_form(u, uy)
        # mixed term from the two diagonal ones and one extra quadratic form
        axy = 0.5 * (target.second_fundamental_form(u, ux + uy) - axx - ayy)
        parts.append([axx, axy, ayy])
    return np.array(parts)


def second_fundamental_term(
    target: TargetManifold, u: np.ndarray, metric: MetricField, parts: np.ndarray | None = None
) -> np.ndarray:
    """``-g^{ij} A(u)(d_i u, d_j u)``, averaged over the forward and backward gradients."""
    if u.shape[-2:] != metric.comps.shape[-2:]:
        raise ValueError(f"shape mismatch: map {u.shape[-2:]} vs metric {metric.comps.shape[-2:]}")
    if parts is None:
        parts = second_fundamental_parts(target, u)
    gi = metric.inverse()
    out = np.zeros_like(u, dtype=float)
    for p in parts:
        out -= gi[0] * p[0] + 2.0 * gi[1] * p[1] + gi[2] * p[2]
    return 0.5 * out


def tension_field(target: TargetManifold, u: np.ndarray, metric: MetricField, parts=None) -> np.ndarray:
    """``tau_g(u) = Delta_g u + A-term``."""
    return laplace_beltrami(metric, u) + second_fundamental_term(target, u, metric, parts)


def sphere_tension_closed_form(u: np.ndarray, metric: MetricField) -> np.ndarray:
    """``Delta_g u + |du|_g^2 u`` for maps into the unit sphere."""
    from .tensors import energy_density

    return laplace_beltrami(metric, u) + 2.0 * energy_density(u, metric) * u


def normal_component(target: TargetManifold, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Pointwise length of the part of ``v`` normal to N at ``u``.

    The tangential part is ``DPi(u)[v]``, taken by complex step.
    """
    n = v - target._directional(u, v)
    return np.sqrt(np.sum(n * n, axis=0))
