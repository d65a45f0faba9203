"""Matrix-free preconditioned conjugate gradients on periodic grids.

The preconditioner inverts the Fourier symbol of a translation-invariant
operator.  The symbol is read off from impulse responses, so any stencil
built from the routines in :mod:`teichflow.grid` can be inverted without
writing its symbol by hand.  For spatially constant metrics the
preconditioner is the exact (pseudo-)inverse and PCG stops after one or two
iterations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    rhs_norm: float


def fourier_blocks(apply: Callable[[np.ndarray], np.ndarray], ncomp: int, shape) -> np.ndarray:
    """Symbol blocks ``S[kx, ky, r, c]`` of a translation-invariant operator.

    ``apply`` maps arrays of shape ``(ncomp, nx, ny)`` to the same shape.
    """
    nx, ny = shape
    S = np.empty((nx, ny, ncomp, ncomp), dtype=complex)
    for c in range(ncomp):
        e = np.zeros((ncomp, nx, ny))
        e[c, 0, 0] = 1.0
        resp = apply(e)
        for r in range(ncomp):
            S[:, :, r, c] = np.fft.fft2(resp[r])
    return S


def block_inverse(S: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Pseudo-inverse of each symbol block; blocks with tiny norm map to zero."""
    scale = np.max(np.abs(S))
    inv = np.zeros_like(S)
    norms = np.max(np.abs(S), axis=(2, 3))
    ok = norms > rcond * scale
    inv[ok] = np.linalg.inv(S[ok])
    return inv


def fft_preconditioner(apply, ncomp: int, shape, rcond: float = 1e-12):
    Sinv = block_inverse(fourier_blocks(apply, ncomp, shape), rcond)

    def precond(r: np.ndarray) -> np.ndarray:
        rh = np.stack([np.fft.fft2(r[c]) for c in range(ncomp)], axis=-1)
        zh = np.einsum("xyrc,xyc->xyr", Sinv, rh)
        return np.stack([np.real(np.fft.ifft2(zh[..., c])) for c in range(ncomp)])

    return precond


def pcg(
    apply: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    inner: Callable[[np.ndarray, np.ndarray], float],
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    rtol: float = 1e-10,
    maxiter: int | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveInfo]:
    """Solve ``apply(x) = rhs`` for an operator self-adjoint and PSD in ``inner``.

    Stops when ``||rhs - apply(x)|| <= rtol * ||rhs||`` in the ``inner`` norm.
    """
    if precond is None:
        precond = lambda r: r  # noqa: E731
    if maxiter is None:
        maxiter = 10 * rhs[0].size
    bnorm = np.sqrt(max(inner(rhs, rhs), 0.0))
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    if bnorm == 0.0:
        return np.zeros_like(rhs), SolveInfo(0, 0.0, 0.0)
    r = rhs - apply(x) if x0 is not None else rhs.copy()
    z = precond(r)
    p = z.copy()
    rz = inner(r, z)
    rnorm = np.sqrt(max(inner(r, r), 0.0))
    it = 0
    while rnorm > rtol * bnorm:
        if it >= maxiter:
            raise SolverError(f"PCG iteration budget exceeded: {it} iterations, residual {rnorm / bnorm:.3e}")
        Ap = apply(p)
        pAp = inner(p, Ap)
        if pAp <= 0:
            raise SolverError("PCG breakdown: operator not positive on search direction")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        # true residual refresh keeps the stopping test honest in long runs
        if (it + 1) % 50 == 0:
            r = rhs - apply(x)
        z = precond(r)
        rz_new = inner(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        rnorm = np.sqrt(max(inner(r, r), 0.0))
        it += 1
    log.debug("pcg converged in %d iterations (rel. residual %.2e)", it, rnorm / bnorm)
    return x, SolveInfo(it, float(rnorm), float(bnorm))
