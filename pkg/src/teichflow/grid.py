"""Discrete calculus on the periodic unit square.

Fields carry their spatial extent in the last two axes (``x`` then ``y``);
leading axes are components.  First derivatives come in three flavours:
forward ``D+``, backward ``D-`` and centred ``D0``.  The Dirichlet pairing uses
the average of the forward and backward one-sided gradients, and the
Laplace-Beltrami operator is its exact discrete adjoint, so that

    sum(lap(f) * w * sqrt(det g)) * h^2 == -grad_pairing(f, w)

holds to rounding for any ``f``, ``w`` and per-cell metric.
"""

from __future__ import annotations

import numpy as np

from .metric import Grid, MetricField, build_grid, grid_of  # noqa: F401

X_AXIS, Y_AXIS = -2, -1


def _h(f: np.ndarray, axis: int) -> float:
    return 1.0 / f.shape[axis]


def dplus(f: np.ndarray, axis: int) -> np.ndarray:
    return (np.roll(f, -1, axis) - f) / _h(f, axis)


def dminus(f: np.ndarray, axis: int) -> np.ndarray:
    return (f - np.roll(f, 1, axis)) / _h(f, axis)


def dcentral(f: np.ndarray, axis: int) -> np.ndarray:
    return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2.0 * _h(f, axis))


def second_difference(f: np.ndarray, axis: int) -> np.ndarray:
    """Compact ``D+ D-`` along one axis."""
    h = _h(f, axis)
    return (np.roll(f, -1, axis) - 2.0 * f + np.roll(f, 1, axis)) / (h * h)


# the two one-sided gradients, paired with the difference that is their adjoint (up to sign)
_SIDES = ((dplus, dminus), (dminus, dplus))


def one_sided_gradients(f: np.ndarray):
    """Yield ``(fx, fy)`` for the forward and the backward gradient."""
    for d, _ in _SIDES:
        yield d(f, X_AXIS), d(f, Y_AXIS)


def pullback(u: np.ndarray) -> np.ndarray:
    """Discrete ``u^* G_N`` as ``(P11, P12, P22)``, averaged over both one-sided gradients.

    ``u`` has shape ``(K, nx, ny)``.
    """
    out = np.zeros((3,) + u.shape[-2:])
    for ux, uy in one_sided_gradients(u):
        out[0] += np.einsum("k...,k...->...", ux, ux)
        out[1] += np.einsum("k...,k...->...", ux, uy)
        out[2] += np.einsum("k...,k...->...", uy, uy)
    return 0.5 * out


def contract_inverse(metric: MetricField, P: np.ndarray) -> np.ndarray:
    """``g^{ij} P_ij`` per cell for a symmetric tensor given as three components."""
    gi = metric.inverse()
    return gi[0] * P[0] + 2.0 * gi[1] * P[1] + gi[2] * P[2]


def _check_same_grid(metric: MetricField, f: np.ndarray):
    if f.shape[-2:] != metric.comps.shape[-2:]:
        raise ValueError(f"shape mismatch: field {f.shape[-2:]} vs metric {metric.comps.shape[-2:]}")


def laplace_beltrami(metric: MetricField, f: np.ndarray) -> np.ndarray:
    """Discrete ``Delta_g f``, applied component-wise to leading axes."""
    _check_same_grid(metric, f)
    gi = metric.inverse()
    sq = metric.sqrt_det
    w11, w12, w22 = sq * gi[0], sq * gi[1], sq * gi[2]
    acc = np.zeros_like(f, dtype=float)
    for d, dadj in _SIDES:
        fx, fy = d(f, X_AXIS), d(f, Y_AXIS)
        acc += dadj(w11 * fx + w12 * fy, X_AXIS) + dadj(w12 * fx + w22 * fy, Y_AXIS)
    return 0.5 * acc / sq


def grad_pairing(metric: MetricField, f: np.ndarray, w: np.ndarray) -> float:
    """``int <grad f, grad w>_g dv_g`` with the averaged one-sided gradients."""
    _check_same_grid(metric, f)
    gi = metric.inverse()
    total = np.zeros(f.shape[-2:])
    for (fx, fy), (wx, wy) in zip(one_sided_gradients(f), one_sided_gradients(w)):
        xx = (fx * wx).reshape(-1, *total.shape).sum(axis=0)
        xy = (fx * wy + fy * wx).reshape(-1, *total.shape).sum(axis=0)
        yy = (fy * wy).reshape(-1, *total.shape).sum(axis=0)
        total += gi[0] * xx + gi[1] * xy + gi[2] * yy
    return float(0.5 * np.sum(total * metric.sqrt_det) * metric.grid.cell_area)


def integrate(metric: MetricField, f: np.ndarray) -> float:
    """Midpoint quadrature ``int f dv_g``."""
    _check_same_grid(metric, f)
    return float(np.sum(f * metric.sqrt_det) * metric.grid.cell_area)


def scalar_l2(metric: MetricField, f: np.ndarray, w: np.ndarray) -> float:
    """``int <f, w> dv_g`` summing over any leading (ambient) components."""
    prod = (f * w).reshape(-1, *f.shape[-2:]).sum(axis=0)
    return integrate(metric, prod)


def sym_full(k: np.ndarray) -> np.ndarray:
    """``(3, nx, ny)`` components to a ``(2, 2, nx, ny)`` array."""
    return np.array([[k[0], k[1]], [k[1], k[2]]])


def raise_both(metric: MetricField, k: np.ndarray) -> np.ndarray:
    """Contravariant components ``g^{ij} g^{lm} k_jm`` as three components."""
    gi = sym_full(metric.inverse())
    K = sym_full(k)
    up = np.einsum("ij...,jm...,ml...->il...", gi, K, gi)
    return np.stack([up[0, 0], up[0, 1], up[1, 1]])


def pointwise_tensor_inner(metric: MetricField, k: np.ndarray, h: np.ndarray) -> np.ndarray:
    up = raise_both(metric, k)
    return up[0] * h[0] + 2.0 * up[1] * h[1] + up[2] * h[2]


def inner_l2(metric: MetricField, k: np.ndarray, h: np.ndarray) -> float:
    """``<k, h>_{L2(M, g)} = int g^{ij} g^{lm} k_il h_jm dv_g``."""
    if k.shape != h.shape or k.shape[0] != 3:
        raise ValueError(f"shape mismatch: {k.shape} vs {h.shape}")
    _check_same_grid(metric, k)
    return integrate(metric, pointwise_tensor_inner(metric, k, h))


def tensor_norm_pointwise(metric: MetricField, k: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(pointwise_tensor_inner(metric, k, k), 0.0))


def vector_inner(metric: MetricField, X: np.ndarray, Y: np.ndarray) -> float:
    """``int g_ij X^i Y^j dv_g`` for vector fields of shape ``(2, nx, ny)``."""
    g = metric.comps
    pw = g[0] * X[0] * Y[0] + g[1] * (X[0] * Y[1] + X[1] * Y[0]) + g[2] * X[1] * Y[1]
    return integrate(metric, pw)


def periodic_distance(metric: MetricField, center) -> np.ndarray:
    """Flat-metric distance from ``center`` to every cell centre.

    Uses the constant (mean) metric and the minimum over the nine nearest
    lattice translates.
    """
    grid = metric.grid
    G = metric.mean_tensor()
    X, Y = grid.coords()
    dx = X - center[0]
    dy = Y - center[1]
    dx -= np.round(dx)
    dy -= np.round(dy)
    best = np.full(grid.shape, np.inf)
    for m in (-1, 0, 1):
        for n in (-1, 0, 1):
            ex, ey = dx + m, dy + n
            q = G[0, 0] * ex * ex + 2 * G[0, 1] * ex * ey + G[1, 1] * ey * ey
            best = np.minimum(best, q)
    return np.sqrt(best)


def ball_weights(metric: MetricField, center, r: float, cutoff: bool = False) -> np.ndarray:
    """Indicator of the metric ball ``B_r(center)``, or a smooth cutoff of it.

    The cutoff equals one on ``B_{r/2}``, vanishes outside ``B_r`` and is a
    smoothstep in between.
    """
    d = periodic_distance(metric, center)
    if not cutoff:
        return (d <= r).astype(float)
    s = np.clip(2.0 * d / r - 1.0, 0.0, 1.0)
    return 1.0 - s * s * (3.0 - 2.0 * s)


def _systole(metric: MetricField) -> float:
    if metric.teich is not None:
        return metric.teich.systole()
    from .metric import systole_of_tensor

    return systole_of_tensor(metric.mean_tensor())


def check_ball_embedded(metric: MetricField, r: float):
    if not r > 0:
        raise ValueError("radius must be positive")
    sys = _systole(metric)
    if r >= 0.5 * sys:
        raise ValueError(f"ball not embedded: r = {r} >= half the systole {0.5 * sys:.6g}")


def energy_density_of(metric: MetricField, u: np.ndarray) -> np.ndarray:
    return 0.5 * contract_inverse(metric, pullback(u))


def local_energy(
    u: np.ndarray,
    metric: MetricField,
    center,
    r: float,
    cutoff: bool = False,
    check_embedded: bool = True,
) -> float:
    """Dirichlet energy of ``u`` restricted to the metric ball ``B_r(center)``."""
    _check_same_grid(metric, u)
    if check_embedded:
        check_ball_embedded(metric, r)
    e = energy_density_of(metric, u)
    return integrate(metric, e * ball_weights(metric, center, r, cutoff))


def local_energy_map(u: np.ndarray, metric: MetricField, r: float, cutoff: bool = False) -> np.ndarray:
    """Local energy ``E(u, B_r(x))`` for every cell centre ``x`` at once.

    The metric must be spatially constant, so the ball is a translated stencil
    and the scan is a circular convolution.
    """
    if not metric.is_constant:
        raise ValueError("local_energy_map needs a spatially constant metric")
    grid = metric.grid
    e = energy_density_of(metric, u) * metric.sqrt_det * grid.cell_area
    X, Y = grid.coords()
    mask = ball_weights(metric, (X[0, 0], Y[0, 0]), r, cutoff)
    # correlate: out(x) = sum_y mask(y - x) e(y); the ball is symmetric about its centre
    return np.real(np.fft.ifft2(np.fft.fft2(e) * np.conj(np.fft.fft2(mask))))
