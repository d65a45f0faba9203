"""L2-orthogonal projection onto the horizontal space H(g).

On the flat torus H(g) is the two-dimensional space of constant trace-free
tensors, i.e. the real parts of the constant quadratic differentials.  Two
independent routes compute the projection:

* :func:`project_basis` expands in an orthonormal basis of H(g);
* :func:`project_decomposition` splits ``k = P + mu g + L_X g`` by solving a
  vector elliptic problem for ``X``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .grid import inner_l2, integrate, tensor_norm_pointwise, vector_inner
from .linsolve import SolverError, fft_preconditioner, pcg
from .metric import MetricField, TeichParams, comps_from_matrix, teich_from_tensor
from .tensors import (
    conformal_killing_operator,
    divergence,
    lie_derivative,
    trace,
    trace_free_part,
)

SOLVER_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class HorizontalBasis:
    theta: tuple[np.ndarray, np.ndarray]
    gram: np.ndarray  # Gram matrix of the raw basis

    def __len__(self):
        return len(self.theta)


def _raw_basis(teich: TeichParams) -> tuple[np.ndarray, np.ndarray]:
    """Constant tensors ``Re(dz^2)`` and ``Im(dz^2)`` for ``dz = dx + omega dy``."""
    w = teich.omega
    re = np.array([1.0, w.real, (w * w).real])
    im = np.array([0.0, w.imag, (w * w).imag])
    return re, im


def _constant_inner(G: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    """``sqrt(det G) tr(G^-1 p G^-1 q)`` for constant tensors given as 3 components (unit area)."""
    Gi = np.linalg.inv(G)
    P = np.array([[p[0], p[1]], [p[1], p[2]]])
    Q = np.array([[q[0], q[1]], [q[1], q[2]]])
    return float(np.sqrt(np.linalg.det(G)) * np.trace(Gi @ P @ Gi @ Q))


def horizontal_basis(metric: MetricField) -> HorizontalBasis:
    """Gram-Schmidt orthonormalised ``{Re(dz^2), Im(dz^2)}`` as constant tensor fields.

    A spatially constant metric without attached parameters (e.g. an
    un-normalised intermediate of the tensor substep) is accepted; its
    conformal class fixes ``omega``.
    """
    if metric.teich is not None:
        teich = metric.teich
    elif metric.is_constant:
        teich, _ = teich_from_tensor(metric.mean_tensor())
    else:
        teich = metric.require_teich()
    shape = metric.comps.shape
    if metric.is_constant:
        G = metric.mean_tensor()
        t1, t2, gram = _constant_basis(teich.a, teich.b, G[0, 0], G[0, 1], G[1, 1])
        theta = tuple(np.broadcast_to(t[:, None, None], shape).copy() for t in (t1, t2))
        return HorizontalBasis(theta, gram)
    raw = [np.broadcast_to(v[:, None, None], shape).copy() for v in _raw_basis(teich)]
    t1, t2, gram = _gram_schmidt(raw, functools.partial(inner_l2, metric))
    return HorizontalBasis((t1, t2), gram)


@functools.lru_cache(maxsize=64)
def _constant_basis(a, b, g11, g12, g22):
    G = np.array([[g11, g12], [g12, g22]])
    raw = _raw_basis(TeichParams(a, b))
    return _gram_schmidt(raw, functools.partial(_constant_inner, G))


def _gram_schmidt(raw, ip):
    gram = np.array([[ip(p, q) for q in raw] for p in raw])
    t1 = raw[0] / np.sqrt(gram[0, 0])
    t2 = raw[1] - ip(raw[1], t1) * t1
    t2 = t2 / np.sqrt(ip(t2, t2))
    return t1, t2, gram


def horizontal_coefficients(metric: MetricField, k: np.ndarray, basis: HorizontalBasis | None = None) -> np.ndarray:
    basis = basis or horizontal_basis(metric)
    if metric.is_constant:
        # the basis is constant, so only the cell average of k enters
        G = metric.mean_tensor()
        kbar = k.mean(axis=(1, 2))
        return np.array([_constant_inner(G, kbar, t[:, 0, 0]) for t in basis.theta])
    return np.array([inner_l2(metric, k, t) for t in basis.theta])


def project_basis(metric: MetricField, k: np.ndarray, basis: HorizontalBasis | None = None) -> np.ndarray:
    """``P_g(k) = sum_j <k, Theta_j> Theta_j``."""
    if k.shape != metric.comps.shape:
        raise ValueError(f"shape mismatch: {k.shape} vs {metric.comps.shape}")
    basis = basis or horizontal_basis(metric)
    c = horizontal_coefficients(metric, k, basis)
    return c[0] * basis.theta[0] + c[1] * basis.theta[1]


# --- vector elliptic problem -------------------------------------------------------


@functools.lru_cache(maxsize=32)
def _cached_preconditioner(shape: tuple[int, int], G: tuple[float, float, float]):
    m = MetricField(comps_from_matrix(np.array([[G[0], G[1]], [G[1], G[2]]]), shape))
    return fft_preconditioner(lambda X: conformal_killing_operator(m, X), 2, shape)


def _preconditioner(metric: MetricField):
    G = metric.mean_tensor()
    return _cached_preconditioner(metric.grid.shape, (G[0, 0], G[0, 1], G[1, 1]))


def solve_vector_elliptic(metric: MetricField, Y: np.ndarray, rtol: float = SOLVER_RTOL) -> np.ndarray:
    """Mean-zero ``X`` with ``delta_g P0 delta_g^* X = Y``.

    The constant vector fields span the kernel (Killing fields of the flat
    torus), so ``Y`` must have zero mean in each chart component.
    """
    if Y.shape != (2,) + metric.comps.shape[1:]:
        raise ValueError(f"shape mismatch: {Y.shape}")
    scale = np.sqrt(np.mean(Y ** 2)) + 1e-300
    means = Y.mean(axis=(1, 2))
    if np.any(np.abs(means) > 1e-9 * scale) and np.any(np.abs(means) > 1e-14):
        raise ValueError("right side not orthogonal to Killing fields (nonzero mean)")
    Y = Y - means[:, None, None]
    inner = lambda p, q: vector_inner(metric, p, q)  # noqa: E731
    X, info = pcg(
        lambda v: conformal_killing_operator(metric, v),
        Y,
        inner,
        precond=_preconditioner(metric),
        rtol=rtol,
        maxiter=10 * metric.grid.ncells,
    )
    X -= X.mean(axis=(1, 2))[:, None, None]
    res = conformal_killing_operator(metric, X) - Y
    if np.sqrt(max(inner(res, res), 0.0)) > rtol * np.sqrt(inner(Y, Y)) * 10:
        raise SolverError("vector elliptic solve did not reach tolerance")
    return X


@dataclass(frozen=True, eq=False)
class Decomposition:
    P: np.ndarray
    mu: np.ndarray
    X: np.ndarray


def project_decomposition(metric: MetricField, k: np.ndarray) -> Decomposition:
    """Split ``k = P + mu g + L_X g`` with ``P`` trace- and divergence-free."""
    if k.shape != metric.comps.shape:
        raise ValueError(f"shape mismatch: {k.shape} vs {metric.comps.shape}")
    k0 = trace_free_part(metric, k)
    X = solve_vector_elliptic(metric, -divergence(metric, k0))
    LX = lie_derivative(metric, X)
    mu = 0.5 * trace(metric, k - LX)
    P = k - mu * metric.comps - LX
    return Decomposition(P, mu, X)


# --- continuity probe ----------------------------------------------------------------


def tensor_l1(metric: MetricField, k: np.ndarray) -> float:
    return integrate(metric, tensor_norm_pointwise(metric, k))


def hs_norm(k: np.ndarray, s: float = 4.0) -> float:
    """Sobolev ``H^s`` norm of tensor components in the fixed chart (Fourier definition)."""
    nx, ny = k.shape[-2:]
    kx = np.fft.fftfreq(nx, 1.0 / nx) * 2 * np.pi
    ky = np.fft.fftfreq(ny, 1.0 / ny) * 2 * np.pi
    w = (1.0 + kx[:, None] ** 2 + ky[None, :] ** 2) ** s
    total = 0.0
    for c, mult in zip(k, (1.0, 2.0, 1.0)):
        ch = np.fft.fft2(c) / (nx * ny)
        total += mult * np.sum(w * np.abs(ch) ** 2)
    return float(np.sqrt(total))


@dataclass
class LipschitzReport:
    samples: int
    max_ratio: float
    mean_ratio: float
    max_hs_l2_ratio: float
    ratios: np.ndarray


def projection_lipschitz_probe(
    g1: MetricField,
    g2: MetricField,
    samples: int,
    rng: np.random.Generator | None = None,
    tensors: list[np.ndarray] | None = None,
) -> LipschitzReport:
    """Empirical ``||P_g1 k - P_g2 k||_L2 / (|params1 - params2| ||k||_L1)`` over random ``k``.

    Also records ``||P_g1 k||_{H^s} / ||P_g1 k||_{L2}`` as a norm-ratio statistic.
    """
    t1, t2 = g1.require_teich(), g2.require_teich()
    dist = float(np.hypot(t1.a - t2.a, t1.b - t2.b))
    rng = rng or np.random.default_rng(0)
    if tensors is None:
        tensors = [rng.standard_normal(g1.comps.shape) for _ in range(samples)]
    b1, b2 = horizontal_basis(g1), horizontal_basis(g2)
    ratios, hs = [], []
    for k in tensors:
        p1 = project_basis(g1, k, b1)
        p2 = project_basis(g2, k, b2)
        diff = np.sqrt(max(inner_l2(g1, p1 - p2, p1 - p2), 0.0))
        l1 = tensor_l1(g1, k)
        ratios.append(0.0 if diff == 0.0 else diff / (dist * l1))
        n2 = np.sqrt(inner_l2(g1, p1, p1))
        if n2 > 0:
            hs.append(hs_norm(p1) / n2)
    ratios = np.array(ratios)
    return LipschitzReport(
        samples=len(ratios),
        max_ratio=float(ratios.max()) if len(ratios) else 0.0,
        mean_ratio=float(ratios.mean()) if len(ratios) else 0.0,
        max_hs_l2_ratio=float(max(hs)) if hs else 0.0,
        ratios=ratios,
    )
