"""Symmetric tensor calculus on the flat torus.

Symmetric (0,2) tensors are ``(3, nx, ny)`` arrays ``(k11, k12, k22)``; vector
fields are ``(2, nx, ny)`` arrays of contravariant components.

The Lie derivative uses centred differences plus a third-order
anti-conformal stabiliser.  Centred differences alone annihilate the
grid-scale modes ``(-1)^i``, ``(-1)^j`` and ``(-1)^(i+j)`` on even grids, which
would leave spurious trace- and divergence-free tensors next to the genuine
holomorphic ones.  The stabiliser adds ``gamma * h^3 (D+D-)^2`` applied to a
pointwise map that is complex-antilinear in the conformal frame of ``g``; its
symbol is real while the centred part is imaginary, so the conformal Killing
operator keeps only the constant vector fields in its kernel for every
``(a, b)`` and every grid size.  On smooth fields it is an O(h^3) change.

The divergence is *defined* as minus the L2 adjoint of the Lie derivative,
so ``<div k, X> = -<k, L_X g>`` is exact in floating point arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    X_AXIS,
    Y_AXIS,
    contract_inverse,
    dcentral,
    inner_l2,
    integrate,
    pullback,
    raise_both,
    second_difference,
    vector_inner,
)
from .metric import MetricField

STABILISER = 1.0 / 16.0


def _check(metric: MetricField, f: np.ndarray):
    if f.shape[-2:] != metric.comps.shape[-2:]:
        raise ValueError(f"shape mismatch: field {f.shape[-2:]} vs metric {metric.comps.shape[-2:]}")


def energy_density(u: np.ndarray, metric: MetricField) -> np.ndarray:
    """``e(u, g) = 1/2 g^{ij} du/dx_i . du/dx_j`` per cell."""
    _check(metric, u)
    return 0.5 * contract_inverse(metric, pullback(u))


def dirichlet_energy(u: np.ndarray, metric: MetricField) -> float:
    return integrate(metric, energy_density(u, metric))


def trace(metric: MetricField, k: np.ndarray) -> np.ndarray:
    _check(metric, k)
    return contract_inverse(metric, k)


def trace_free_part(metric: MetricField, k: np.ndarray) -> np.ndarray:
    return k - 0.5 * trace(metric, k) * metric.comps


def hopf_real_tensor(u: np.ndarray, metric: MetricField) -> np.ndarray:
    """Real part of the Hopf differential, ``k = 2 u^*G_N - 2 e(u, g) g``."""
    _check(metric, u)
    P = pullback(u)
    e = 0.5 * contract_inverse(metric, P)
    return 2.0 * P - 2.0 * e * metric.comps


def quadratic_differential_tensor(metric: MetricField, phi) -> np.ndarray:
    """Tensor form of ``Re(phi dz^2)`` with ``dz = dx + omega dy``."""
    omega = metric.require_teich().omega
    phi = np.broadcast_to(np.asarray(phi, dtype=complex), metric.comps.shape[1:])
    return np.stack([phi.real, (phi * omega).real, (phi * omega * omega).real])


def hopf_complex(u: np.ndarray, metric: MetricField) -> np.ndarray:
    """Coefficient ``phi`` of the Hopf differential in the frame ``dz = dx + omega dy``.

    Fixed by ``Re(phi dz^2) = hopf_real_tensor(u, g)``.
    """
    t = metric.require_teich()
    k = hopf_real_tensor(u, metric)
    return tensor_to_quadratic_differential(metric, k, teich=t)


def tensor_to_quadratic_differential(metric: MetricField, k: np.ndarray, teich=None) -> np.ndarray:
    """Inverse of :func:`quadratic_differential_tensor` on trace-free tensors."""
    t = teich or metric.require_teich()
    a, b = t.a, t.b
    re = k[0]
    im = (a * k[0] - k[1]) / b
    return re + 1j * im


# --- Lie derivative and divergence ------------------------------------------------


def _conformal_frame(metric: MetricField):
    """Per-cell ``(a, b)`` of the unit-determinant rescaling of ``g``."""
    sq = metric.sqrt_det
    b = sq / metric.g11
    a = metric.g12 * b / sq
    return a, b


def _antilinear_matrix(metric: MetricField) -> np.ndarray:
    """Pointwise map ``X -> K(X)`` as an array ``M[c, d, nx, ny]`` (tensor comp ``c``, vector comp ``d``).

    In conformal coordinates ``x' = x + a y, y' = b y`` the map sends
    ``(X'1, X'2)`` to the trace-free tensor ``[[X'1, -X'2], [-X'2, -X'1]] / b``,
    which is pulled back to the grid chart.
    """
    a, b = _conformal_frame(metric)
    zero = np.zeros_like(a)
    one = np.ones_like(a)
    # E maps chart components to conformal components
    E = np.array([[one, a], [zero, b]])
    M = np.zeros((3, 2) + a.shape)
    for d in range(2):
        Xp = E[:, d]  # conformal components of the unit chart vector e_d
        hp = np.array([[Xp[0], -Xp[1]], [-Xp[1], -Xp[0]]]) / b
        h = np.einsum("ai...,ab...,bj...->ij...", E, hp, E)
        M[0, d], M[1, d], M[2, d] = h[0, 0], h[0, 1], h[1, 1]
    return M


def _stab_operator(f: np.ndarray) -> np.ndarray:
    """``hx^3 (D+D-)_x^2 + hy^3 (D+D-)_y^2``, symmetric and PSD."""
    hx, hy = 1.0 / f.shape[-2], 1.0 / f.shape[-1]
    sx = second_difference(second_difference(f, X_AXIS), X_AXIS)
    sy = second_difference(second_difference(f, Y_AXIS), Y_AXIS)
    return hx ** 3 * sx + hy ** 3 * sy


def lower(metric: MetricField, X: np.ndarray) -> np.ndarray:
    g = metric.comps
    return np.stack([g[0] * X[0] + g[1] * X[1], g[1] * X[0] + g[2] * X[1]])


def lie_derivative(metric: MetricField, X: np.ndarray) -> np.ndarray:
    """``(L_X g)_ij = d_i X_j + d_j X_i`` for a flat metric, plus the grid-scale stabiliser."""
    _check(metric, X)
    Xb = lower(metric, X)
    T = np.stack(
        [
            2.0 * dcentral(Xb[0], X_AXIS),
            dcentral(Xb[1], X_AXIS) + dcentral(Xb[0], Y_AXIS),
            2.0 * dcentral(Xb[1], Y_AXIS),
        ]
    )
    M = _antilinear_matrix(metric)
    KX = np.einsum("cd...,d...->c...", M, X)
    return T + STABILISER * _stab_operator(KX)


def divergence(metric: MetricField, k: np.ndarray) -> np.ndarray:
    """``delta_g k`` defined by ``<delta_g k, X> = -<k, L_X g>`` for all ``X``."""
    _check(metric, k)
    grid = metric.grid
    R = raise_both(metric, k) * metric.sqrt_det * grid.cell_area
    # Euclidean gradient of X -> <L_X g, k> with respect to the lowered field
    Fb = np.stack(
        [
            -2.0 * (dcentral(R[0], X_AXIS) + dcentral(R[1], Y_AXIS)),
            -2.0 * (dcentral(R[1], X_AXIS) + dcentral(R[2], Y_AXIS)),
        ]
    )
    F = lower(metric, Fb)
    wR = np.stack([R[0], 2.0 * R[1], R[2]])
    M = _antilinear_matrix(metric)
    F += STABILISER * np.einsum("cd...,c...->d...", M, _stab_operator(wR))
    # convert the Euclidean gradient into the g-weighted vector inner product
    gi = metric.inverse()
    scale = metric.sqrt_det * grid.cell_area
    adj = np.stack([gi[0] * F[0] + gi[1] * F[1], gi[1] * F[0] + gi[2] * F[1]]) / scale
    return -adj


def conformal_killing_operator(metric: MetricField, X: np.ndarray) -> np.ndarray:
    """``delta_g P0 delta_g^* X`` with ``delta_g^* X = -L_X g`` and ``P0`` the trace-free part.

    Self-adjoint and positive semi-definite for :func:`grid.vector_inner`;
    its kernel is the constant vector fields.
    """
    return -divergence(metric, trace_free_part(metric, lie_derivative(metric, X)))


# --- energy variation in the metric ----------------------------------------------


@dataclass
class GradientCheck:
    step: float
    finite_difference: float
    analytic: float

    @property
    def gap(self) -> float:
        return abs(self.finite_difference - self.analytic)


def energy_metric_gradient_check(u: np.ndarray, metric: MetricField, l: np.ndarray, s: float) -> GradientCheck:
    """Compare ``dE/ds (u, g + s l)`` by centred differences with ``-1/4 <k(u, g), l>``."""
    _check(metric, l)
    gp = MetricField(metric.comps + s * l)
    gm = MetricField(metric.comps - s * l)
    fd = (dirichlet_energy(u, gp) - dirichlet_energy(u, gm)) / (2.0 * s)
    analytic = -0.25 * inner_l2(metric, hopf_real_tensor(u, metric), l)
    return GradientCheck(s, fd, analytic)


def tensor_l2sq(metric: MetricField, k: np.ndarray) -> float:
    return inner_l2(metric, k, k)


def vector_l2sq(metric: MetricField, X: np.ndarray) -> float:
    return vector_inner(metric, X, X)
