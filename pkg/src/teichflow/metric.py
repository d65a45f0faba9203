"""Flat unit-area metrics on the torus and their Teichmüller parameters.

A flat unit-area metric on the unit square (with periodic identification) is

    g(a, b) = (1/b) * [[1, a], [a, a^2 + b^2]],   b > 0,

i.e. ``g = (1/b) |dx + omega dy|^2`` with ``omega = a + i b``.  Fields are stored
per cell as ``(3, nx, ny)`` arrays holding ``(g11, g12, g22)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Periodic cell-centred grid on the unit square."""

    nx: int
    ny: int

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("grid counts must be integers")
        if self.nx < 8 or self.ny < 8:
            raise ValueError(f"grid too coarse: ({self.nx}, {self.ny}), need >= 8 per axis")

    @property
    def hx(self) -> float:
        return 1.0 / self.nx

    @property
    def hy(self) -> float:
        return 1.0 / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def ncells(self) -> int:
        return self.nx * self.ny

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates ``(X, Y)``, each of shape ``(nx, ny)``."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def wrap(self, i: int, j: int) -> tuple[int, int]:
        return i % self.nx, j % self.ny


def build_grid(nx: int, ny: int) -> Grid:
    return Grid(int(nx), int(ny))


def grid_of(arr: np.ndarray) -> Grid:
    """Grid implied by the trailing two axes of a field array."""
    return Grid(arr.shape[-2], arr.shape[-1])


@dataclass(frozen=True)
class TeichParams:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.b <= 0:
            raise ValueError(f"TeichParams invalid: (a, b) = ({self.a}, {self.b}), need b > 0")

    @property
    def omega(self) -> complex:
        return complex(self.a, self.b)

    def tensor(self) -> np.ndarray:
        a, b = self.a, self.b
        return np.array([[1.0, a], [a, a * a + b * b]]) / b

    def tensor_derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        """Partial derivatives of ``g(a, b)`` with respect to ``a`` and ``b``."""
        a, b = self.a, self.b
        dga = np.array([[0.0, 1.0], [1.0, 2.0 * a]]) / b
        dgb = np.array([[-1.0, -a], [-a, b * b - a * a]]) / (b * b)
        return dga, dgb

    def systole(self, nmax: int = 10) -> float:
        """Length of the shortest closed geodesic of the unit-area flat torus."""
        m, n = np.meshgrid(np.arange(-nmax, nmax + 1), np.arange(-nmax, nmax + 1), indexing="ij")
        mask = (m != 0) | (n != 0)
        lengths = np.abs(m[mask] + n[mask] * self.omega)
        return float(lengths.min() / math.sqrt(self.b))

    def as_tuple(self) -> tuple[float, float]:
        return (self.a, self.b)


def teich_from_tensor(G: np.ndarray) -> tuple[TeichParams, float]:
    """Recover ``(a, b)`` and the area scale ``sqrt(det G)`` from a constant SPD tensor."""
    G = np.asarray(G, dtype=float)
    det = G[0, 0] * G[1, 1] - G[0, 1] ** 2
    if not det > 0 or not G[0, 0] > 0:
        raise ValueError("metric tensor is not SPD")
    scale = math.sqrt(det)
    b = scale / G[0, 0]
    a = G[0, 1] * b / scale
    return TeichParams(float(a), float(b)), scale


def comps_from_matrix(G: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    out = np.empty((3,) + tuple(shape))
    out[0] = G[0, 0]
    out[1] = G[0, 1]
    out[2] = G[1, 1]
    return out


@dataclass(frozen=True, eq=False)
class MetricField:
    """Per-cell symmetric 2x2 metric, optionally tagged with Teichmüller parameters."""

    comps: np.ndarray
    teich: Optional[TeichParams] = None

    def __post_init__(self):
        c = np.asarray(self.comps, dtype=float)
        if c.ndim != 3 or c.shape[0] != 3:
            raise ValueError(f"metric comps must have shape (3, nx, ny), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("metric has non-finite entries")
        object.__setattr__(self, "comps", c)
        self.check_spd()
        if self.teich is not None:
            dev = np.max(np.abs(self.det - 1.0))
            if dev > 1e-12:
                raise ValueError(f"unit-area metric has det g deviating from 1 by {dev:.3e}")

    @classmethod
    def from_teich(cls, grid: Grid, teich: TeichParams) -> "MetricField":
        return cls(comps_from_matrix(teich.tensor(), grid.shape), teich)

    @classmethod
    def from_tensor(cls, grid: Grid, G: np.ndarray, normalize: bool = False) -> "MetricField":
        """Spatially constant metric from a 2x2 tensor.

        With ``normalize`` the tensor is rescaled to unit determinant and the
        Teichmüller parameters are attached.
        """
        G = np.asarray(G, dtype=float)
        if normalize:
            teich, scale = teich_from_tensor(G)
            # rebuild from parameters so that det g = 1 holds to rounding
            return cls.from_teich(grid, teich)
        return cls(comps_from_matrix(G, grid.shape))

    @property
    def grid(self) -> Grid:
        return grid_of(self.comps)

    @property
    def g11(self):
        return self.comps[0]

    @property
    def g12(self):
        return self.comps[1]

    @property
    def g22(self):
        return self.comps[2]

    @property
    def det(self) -> np.ndarray:
        return self.g11 * self.g22 - self.g12 ** 2

    @property
    def sqrt_det(self) -> np.ndarray:
        return np.sqrt(self.det)

    def inverse(self) -> np.ndarray:
        """Inverse metric components ``(g^11, g^12, g^22)`` as a ``(3, nx, ny)`` array."""
        d = self.det
        return np.stack([self.g22 / d, -self.g12 / d, self.g11 / d])

    def check_spd(self):
        bad = (self.g11 <= 0) | (self.det <= 0)
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise ValueError(f"metric not SPD at cell ({i}, {j})")

    @property
    def is_constant(self) -> bool:
        c = self.comps
        return bool(np.all(c == c[:, :1, :1]))

    def mean_tensor(self) -> np.ndarray:
        m = self.comps.mean(axis=(1, 2))
        return np.array([[m[0], m[1]], [m[1], m[2]]])

    def require_teich(self) -> TeichParams:
        if self.teich is None:
            raise ValueError("missing TeichParams: operation needs a flat unit-area metric")
        return self.teich

    def __add__(self, other):
        comps = other.comps if isinstance(other, MetricField) else np.asarray(other)
        return MetricField(self.comps + comps)


def systole_of_tensor(G: np.ndarray, nmax: int = 10) -> float:
    """Shortest lattice vector ``(m, n)`` in the norm of a constant tensor ``G``."""
    m, n = np.meshgrid(np.arange(-nmax, nmax + 1), np.arange(-nmax, nmax + 1), indexing="ij")
    mask = (m != 0) | (n != 0)
    m, n = m[mask], n[mask]
    q = G[0, 0] * m * m + 2 * G[0, 1] * m * n + G[1, 1] * n * n
    return float(np.sqrt(q.min()))
