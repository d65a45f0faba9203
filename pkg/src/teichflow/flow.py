"""Coupled flow of a map and a flat unit-area metric.

    du/dt = tau_g(u),        dg/dt = (eta^2 / 4) P_g(k(u, g))

One step of :func:`step_coupled` runs a Picard loop.  Each sweep integrates
the metric equation over the step with the map frozen at the current iterate
(explicit midpoint in the Teichmüller parameters), then advances the map by a
semi-implicit heat step in the new metric and projects back onto the target.
The loop stops when successive map iterates agree to ``picard_tol``.
"""

from __future__ import annotations

import functools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .grid import (
    integrate,
    laplace_beltrami,
    local_energy_map,
    periodic_distance,
    scalar_l2,
    second_difference,
    ball_weights,
    X_AXIS,
    Y_AXIS,
    dcentral,
)
from .linsolve import fft_preconditioner, pcg
from .metric import MetricField, TeichParams, comps_from_matrix
from .projection import project_basis
from .targets import TargetManifold, second_fundamental_parts, second_fundamental_term, tension_field
from .tensors import dirichlet_energy, energy_density, hopf_real_tensor, tensor_l2sq

log = logging.getLogger(__name__)

# sup-norm differences below this are treated as rounding noise
GAP_FLOOR = 1e-12
MANIFOLD_TOL = 1e-9


class FlowError(RuntimeError):
    """The stepper cannot continue (Picard divergence, off-manifold drift)."""


@dataclass(frozen=True)
class FlowConfig:
    dt: float = 1e-4
    eta: float = 2.0
    picard_iters: int = 8
    picard_tol: float = 1e-12
    concentration_threshold: float = 0.3
    concentration_radii: tuple = (0.2, 0.1, 0.05)
    systole_floor: float = 0.1
    max_steps: int = 1000
    t_end: float | None = None
    metric_substep: str = "params"

    def __post_init__(self):
        object.__setattr__(self, "concentration_radii", tuple(float(r) for r in self.concentration_radii))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        # eta = 0 freezes the metric (plain harmonic map heat flow)
        if not self.eta >= 0:
            raise ValueError("eta must be non-negative")
        if not self.systole_floor > 0:
            raise ValueError("systole_floor must be positive")
        if self.picard_iters < 1:
            raise ValueError("picard_iters must be at least 1")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if not self.concentration_threshold > 0:
            raise ValueError("concentration_threshold must be positive")
        if not self.concentration_radii or min(self.concentration_radii) <= 0:
            raise ValueError("concentration_radii must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.metric_substep not in ("params", "tensor"):
            raise ValueError(f"metric_substep must be 'params' or 'tensor', got {self.metric_substep!r}")


@dataclass(frozen=True)
class Event:
    kind: str
    step: int
    t: float
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "step": self.step, "t": self.t, **self.detail}


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    u: np.ndarray
    g: MetricField
    target: TargetManifold
    eta: float
    E: float
    tension_l2sq: float
    horiz_hopf_l2sq: float
    step: int = 0
    events: tuple = ()
    picard_gaps: tuple = ()
    halted: bool = False
    # second fundamental form parts of u, reused by the next step
    a_parts: np.ndarray | None = field(default=None, repr=False)

    @property
    def teich(self) -> TeichParams:
        return self.g.require_teich()

    @property
    def metric_speed(self) -> float:
        """``||dg/dt||_{L2}`` at this state."""
        return 0.25 * self.eta ** 2 * math.sqrt(max(self.horiz_hopf_l2sq, 0.0))


def make_state(
    u: np.ndarray,
    g: MetricField,
    target: TargetManifold,
    eta: float,
    t: float = 0.0,
    step: int = 0,
    events: tuple = (),
    picard_gaps: tuple = (),
    halted: bool = False,
) -> FlowState:
    """Snapshot with energy and dissipation terms evaluated from ``(u, g)``."""
    g.require_teich()
    u = np.array(u, dtype=float)
    if u.shape[-2:] != g.comps.shape[-2:]:
        raise ValueError(f"shape mismatch: map {u.shape[-2:]} vs metric {g.comps.shape[-2:]}")
    target.check_on_manifold(u, MANIFOLD_TOL)
    u.setflags(write=False)
    parts = second_fundamental_parts(target, u)
    tau = tension_field(target, u, g, parts)
    Pk = project_basis(g, hopf_real_tensor(u, g))
    return FlowState(
        t=float(t),
        u=u,
        g=g,
        target=target,
        eta=float(eta),
        E=dirichlet_energy(u, g),
        tension_l2sq=scalar_l2(g, tau, tau),
        horiz_hopf_l2sq=tensor_l2sq(g, Pk),
        step=int(step),
        events=tuple(events),
        picard_gaps=tuple(picard_gaps),
        halted=halted,
        a_parts=parts,
    )


# --- metric equation -------------------------------------------------------------------


def metric_velocity(u: np.ndarray, g: MetricField, eta: float) -> np.ndarray:
    """``(eta^2 / 4) P_g(k(u, g))``, a constant horizontal tensor field."""
    return 0.25 * eta ** 2 * project_basis(g, hopf_real_tensor(u, g))


def _constant_inner(G: np.ndarray, A: np.ndarray, B: np.ndarray) -> float:
    Gi = np.linalg.inv(G)
    return float(np.trace(Gi @ A @ Gi @ B))


def parameter_rates(teich: TeichParams, V: np.ndarray) -> tuple[float, float]:
    """``(da/dt, db/dt)`` whose image under the differential of ``(a, b) -> g(a, b)`` is ``V``.

    ``V`` is a constant tensor (3 components or a 2x2 matrix).  The tangent
    space of unit-area flat metrics is two dimensional and equals H(g), so the
    least-squares fit is exact for horizontal ``V``.
    """
    V = np.asarray(V, dtype=float)
    if V.shape == (3,):
        V = np.array([[V[0], V[1]], [V[1], V[2]]])
    G = teich.tensor()
    basis = teich.tensor_derivatives()
    gram = np.array([[_constant_inner(G, p, q) for q in basis] for p in basis])
    rhs = np.array([_constant_inner(G, p, V) for p in basis])
    da, db = np.linalg.solve(gram, rhs)
    return float(da), float(db)


def _velocity_const(u: np.ndarray, g: MetricField, eta: float) -> np.ndarray:
    V = metric_velocity(u, g, eta)
    return np.array([[V[0, 0, 0], V[1, 0, 0]], [V[1, 0, 0], V[2, 0, 0]]])


def _predict_params(u0, g: MetricField, dt: float, eta: float) -> TeichParams:
    t0 = g.require_teich()
    da, db = parameter_rates(t0, _velocity_const(u0, g, eta))
    return TeichParams(t0.a + 0.5 * dt * da, t0.b + 0.5 * dt * db)


def _correct_params(u_mid, g: MetricField, half: TeichParams, dt: float, eta: float) -> MetricField:
    t0, grid = g.require_teich(), g.grid
    da, db = parameter_rates(half, _velocity_const(u_mid, MetricField.from_teich(grid, half), eta))
    return MetricField.from_teich(grid, TeichParams(t0.a + dt * da, t0.b + dt * db))


def _predict_tensor(u0, g: MetricField, dt: float, eta: float) -> MetricField:
    G0 = g.mean_tensor()
    return MetricField(comps_from_matrix(G0 + 0.5 * dt * _velocity_const(u0, g, eta), g.grid.shape))


def _correct_tensor(u_mid, g: MetricField, half: MetricField, dt: float, eta: float) -> MetricField:
    G1 = g.mean_tensor() + dt * _velocity_const(u_mid, half, eta)
    return MetricField.from_tensor(g.grid, G1, normalize=True)


_SUBSTEPS = {"params": (_predict_params, _correct_params), "tensor": (_predict_tensor, _correct_tensor)}


def metric_substep_params(u0: np.ndarray, u_mid: np.ndarray, g: MetricField, dt: float, eta: float) -> MetricField:
    """Explicit midpoint step for ``(a, b)``; ``u0`` drives the predictor, ``u_mid`` the corrector."""
    return _correct_params(u_mid, g, _predict_params(u0, g, dt, eta), dt, eta)


def metric_substep_tensor(u0: np.ndarray, u_mid: np.ndarray, g: MetricField, dt: float, eta: float) -> MetricField:
    """Explicit midpoint step on the full tensor, renormalised to unit determinant at the end."""
    return _correct_tensor(u_mid, g, _predict_tensor(u0, g, dt, eta), dt, eta)


# --- map equation ----------------------------------------------------------------------


def laplace_symbol(G: np.ndarray, shape) -> np.ndarray:
    """Fourier symbol of :func:`grid.laplace_beltrami` for a constant metric ``G``.

    Built from the symbols of the one-sided differences, ``(e^{i theta} - 1)/h``
    and ``(1 - e^{-i theta})/h``; the result is real and non-positive.
    """
    nx, ny = shape
    tx = 2 * np.pi * np.fft.fftfreq(nx)[:, None]
    ty = 2 * np.pi * np.fft.fftfreq(ny)[None, :]
    dp = [(np.exp(1j * tx) - 1) * nx, (np.exp(1j * ty) - 1) * ny]
    dm = [(1 - np.exp(-1j * tx)) * nx, (1 - np.exp(-1j * ty)) * ny]
    Gi = np.linalg.inv(G)
    sym = np.zeros((nx, ny), dtype=complex)
    for i in range(2):
        for j in range(2):
            sym = sym + 0.5 * Gi[i, j] * (dm[i] * dp[j] + dp[i] * dm[j])
    return sym.real


@functools.lru_cache(maxsize=8)
def _heat_preconditioner(shape, G: tuple, dt: float):
    m = MetricField(comps_from_matrix(np.array([[G[0], G[1]], [G[1], G[2]]]), shape))
    scalar = fft_preconditioner(lambda f: f - dt * laplace_beltrami(m, f), 1, shape)
    return lambda r: np.concatenate([scalar(r[c : c + 1]) for c in range(r.shape[0])])


def heat_solve(g: MetricField, rhs: np.ndarray, dt: float, x0: np.ndarray | None = None) -> np.ndarray:
    """Solve ``(I - dt Delta_g) x = rhs`` component-wise.

    A spatially constant metric makes the operator a Fourier multiplier, and
    the solve is one FFT pair per component.  Otherwise preconditioned CG is
    used, with the constant-metric inverse as preconditioner.
    """
    if g.is_constant:
        sym = 1.0 - dt * laplace_symbol(g.mean_tensor(), g.grid.shape)
        return np.real(np.fft.ifft2(np.fft.fft2(rhs) / sym))
    G = g.mean_tensor()
    precond = _heat_preconditioner(g.grid.shape, (G[0, 0], G[0, 1], G[1, 1]), float(dt))
    x, _ = pcg(
        lambda f: f - dt * laplace_beltrami(g, f),
        rhs,
        lambda p, q: scalar_l2(g, p, q),
        precond=precond,
        rtol=1e-13,
        maxiter=10 * g.grid.ncells,
        x0=x0,
    )
    return x


def map_substep(target: TargetManifold, u0: np.ndarray, g: MetricField, dt: float, parts=None) -> np.ndarray:
    """Implicit Laplace-Beltrami, explicit second fundamental form, then projection onto N."""
    rhs = u0 + dt * second_fundamental_term(target, u0, g, parts)
    return target.project(heat_solve(g, rhs, dt, x0=u0))


# --- the coupled step ------------------------------------------------------------------


def _sup(a: np.ndarray) -> float:
    return float(np.max(np.abs(a)))


def step_coupled(state: FlowState, cfg: FlowConfig, dt: float | None = None) -> FlowState:
    """Advance ``state`` by one Picard-split step."""
    if state.halted:
        raise FlowError("state is halted; no further steps are taken")
    dt = cfg.dt if dt is None else float(dt)
    predict, correct = _SUBSTEPS[cfg.metric_substep]
    target, u0, g0 = state.target, state.u, state.g
    half = predict(u0, g0, dt, cfg.eta)
    u_prev = u0
    gaps: list[float] = []
    for _ in range(cfg.picard_iters):
        u_mid = target.project(0.5 * (u0 + u_prev), check=False)
        g_new = correct(u_mid, g0, half, dt, cfg.eta)
        u_new = map_substep(target, u0, g_new, dt, state.a_parts)
        gap = _sup(u_new - u_prev)
        gaps.append(gap)
        u_prev = u_new
        if gap < cfg.picard_tol:
            break
        if len(gaps) >= 2 and gap > gaps[-2] and gap > GAP_FLOOR:
            raise FlowError(f"dt too large: Picard iterate gap grew from {gaps[-2]:.3e} to {gap:.3e}")
    events = list(state.events)
    halted = False
    sys = g_new.require_teich().systole()
    if sys < cfg.systole_floor:
        halted = True
        events.append(
            Event("halt_systole", state.step + 1, state.t + dt, {"systole": sys, "a": g_new.teich.a, "b": g_new.teich.b})
        )
    return make_state(
        u_new,
        g_new,
        target,
        cfg.eta,
        t=state.t + dt,
        step=state.step + 1,
        events=tuple(events),
        picard_gaps=tuple(gaps),
        halted=halted,
    )


def gap_ratios(gaps: Sequence[float], floor: float = GAP_FLOOR) -> list[float]:
    """Successive contraction ratios, ignoring pairs already at the rounding floor."""
    return [b / a for a, b in zip(gaps, gaps[1:]) if a > 10 * floor and b > floor]


def picard_threshold(
    state: FlowState,
    cfg: FlowConfig,
    lo: float = 1e-8,
    hi: float = 1e-1,
    iters: int = 30,
    steps: int = 1,
) -> float:
    """Largest ``dt`` (bisection in log scale) whose Picard gap ratios stay at or below one half."""

    def ok(dt: float) -> bool:
        c = replace(cfg, picard_iters=max(cfg.picard_iters, 6), picard_tol=GAP_FLOOR)
        s = state
        try:
            for _ in range(steps):
                s = step_coupled(s, c, dt)
                if any(r > 0.5 for r in gap_ratios(s.picard_gaps)):
                    return False
                if s.halted:
                    break
        except Exception:
            return False
        return True

    if ok(hi):
        return hi
    if not ok(lo):
        return 0.0
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# --- diagnostics ---------------------------------------------------------------------


def midpoint_state(before: FlowState, after: FlowState) -> FlowState:
    ta, tb = before.teich, after.teich
    g = MetricField.from_teich(before.g.grid, TeichParams(0.5 * (ta.a + tb.a), 0.5 * (ta.b + tb.b)))
    u = before.target.project(0.5 * (before.u + after.u))
    return make_state(u, g, before.target, before.eta, t=0.5 * (before.t + after.t))


def dissipation(state: FlowState) -> float:
    """``||tau||^2 + (eta^2 / 16) ||P_g k||^2``."""
    return state.tension_l2sq + state.eta ** 2 / 16.0 * state.horiz_hopf_l2sq


def energy_identity_residual(before: FlowState, after: FlowState, cfg: FlowConfig | None = None) -> float:
    """``|dE/dt + dissipation|`` with the dissipation taken at the step midpoint."""
    dt = after.t - before.t
    if not dt > 0:
        raise ValueError("after must be later than before")
    mid = midpoint_state(before, after)
    return abs((after.E - before.E) / dt + dissipation(mid))


def systole(g: MetricField) -> float:
    return g.require_teich().systole()


def wp_length(trajectory) -> float:
    """Half the L2 length of the metric path by the trapezoid rule.

    ``trajectory`` holds :class:`FlowState` snapshots or ``(t, speed)`` pairs.
    """
    pts = [(s.t, s.metric_speed) if isinstance(s, FlowState) else (float(s[0]), float(s[1])) for s in trajectory]
    if len(pts) < 2:
        raise ValueError("wp_length needs at least two snapshots")
    total = 0.0
    for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
        total += 0.5 * (v0 + v1) * abs(t1 - t0)
    return 0.5 * total


# --- concentration -------------------------------------------------------------------


@dataclass
class ConcentrationPoint:
    index: tuple
    position: tuple
    energies: dict
    flagged_radii: list
    interpolation_ratio: float | None = None


@dataclass
class ConcentrationReport:
    points: list
    radii: tuple
    threshold: float
    bubble_suspected: bool
    window: np.ndarray | None = None
    window_coords: tuple | None = None
    skipped_radii: tuple = ()

    @property
    def empty(self) -> bool:
        return not self.points

    def as_dict(self) -> dict:
        return {
            "points": [
                {
                    "index": list(p.index),
                    "position": list(p.position),
                    "energies": {repr(r): e for r, e in p.energies.items()},
                    "flagged_radii": p.flagged_radii,
                    "interpolation_ratio": p.interpolation_ratio,
                }
                for p in self.points
            ],
            "bubble_suspected": self.bubble_suspected,
            "skipped_radii": list(self.skipped_radii),
        }


def _peaks(values: np.ndarray, mask: np.ndarray, metric: MetricField, r: float) -> list[tuple[int, int]]:
    """Greedy non-maximum suppression: strongest flagged cell, then drop cells within ``2 r``."""
    X, Y = metric.grid.coords()
    remaining = mask.copy()
    out = []
    while np.any(remaining):
        flat = np.where(remaining, values, -np.inf)
        i, j = np.unravel_index(int(np.argmax(flat)), flat.shape)
        out.append((int(i), int(j)))
        remaining &= periodic_distance(metric, (X[i, j], Y[i, j])) > 2 * r
    return out


def hessian_l2_local(u: np.ndarray, metric: MetricField, weight: np.ndarray) -> float:
    """``int weight |nabla^2 u|_g^2`` with compact second differences."""
    gi = metric.inverse()
    uxx = second_difference(u, X_AXIS)
    uyy = second_difference(u, Y_AXIS)
    uxy = dcentral(dcentral(u, X_AXIS), Y_AXIS)
    H = np.array([[uxx, uxy], [uxy, uyy]])
    Gi = np.array([[gi[0], gi[1]], [gi[1], gi[2]]])
    dens = np.einsum("ia...,jb...,ijk...,abk...->...", Gi, Gi, H, H)
    return integrate(metric, weight * dens)


def interpolation_ratio(state: FlowState, center, r: float) -> float:
    """``int phi^2 |nabla^2 u|^2 / (E(B_r)/r^2 + int phi^2 |tau|^2)`` with ``phi`` a cutoff on ``B_r``.

    A bounded ratio as the local energy stays small is the behaviour the
    local H^2 interpolation estimate predicts; it is monitored, not asserted.
    """
    u, g = state.u, state.g
    phi = ball_weights(g, center, r, cutoff=True)
    Er = integrate(g, energy_density(u, g) * ball_weights(g, center, r))
    tau = tension_field(state.target, u, g)
    den = Er / r ** 2 + integrate(g, phi ** 2 * np.sum(tau * tau, axis=0))
    if den == 0.0:
        return 0.0
    return hessian_l2_local(u, g, phi ** 2) / den


def detect_concentration(state: FlowState, cfg: FlowConfig, window_cells: int = 8) -> ConcentrationReport:
    """Cells where ``E(B_r) >= eps0`` while ``E(B_2r) <= 2 E(B_r)``, for each configured radius.

    ``bubble_suspected`` is set when some point is flagged at every radius.
    Radii at or above half the systole are skipped and listed in the report.
    """
    g, u = state.g, state.u
    eps0 = cfg.concentration_threshold
    sys = g.require_teich().systole()
    # radii whose balls are no longer embedded are skipped (the torus has degenerated past them)
    skipped = tuple(sorted(r for r in cfg.concentration_radii if r >= 0.5 * sys))
    radii = tuple(sorted((r for r in cfg.concentration_radii if r < 0.5 * sys), reverse=True))
    if not radii:
        raise ValueError(f"ball not embedded: every radius is >= half the systole {0.5 * sys:.6g}")
    maps, flags = {}, {}
    for r in radii:
        er = local_energy_map(u, g, r)
        e2r = local_energy_map(u, g, 2 * r)
        maps[r] = er
        flags[r] = (er >= eps0) & (e2r <= 2.0 * er)
    X, Y = g.grid.coords()
    points: list[ConcentrationPoint] = []
    for r in sorted(radii):
        for i, j in _peaks(maps[r], flags[r], g, r):
            pos = (float(X[i, j]), float(Y[i, j]))
            if any(periodic_distance(g, p.position)[i, j] <= 2 * r for p in points):
                continue
            points.append(
                ConcentrationPoint(
                    index=(i, j),
                    position=pos,
                    energies={rr: float(maps[rr][i, j]) for rr in radii},
                    flagged_radii=[rr for rr in radii if flags[rr][i, j]],
                )
            )
    bubble = any(len(p.flagged_radii) == len(radii) for p in points)
    window = coords = None
    if points:
        rmin = min(radii)
        best = max(points, key=lambda p: p.energies[rmin])
        best.interpolation_ratio = interpolation_ratio(state, best.position, rmin)
        # rescaled window around the strongest point: cells within window_cells, coordinates in units of rmin
        i0, j0 = best.index
        off = np.arange(-window_cells, window_cells + 1)
        ii = (i0 + off) % g.grid.nx
        jj = (j0 + off) % g.grid.ny
        window = u[:, ii][:, :, jj]
        coords = (off * g.grid.hx / rmin, off * g.grid.hy / rmin)
    return ConcentrationReport(points, radii, eps0, bubble, window, coords, skipped)


def max_local_energy(state: FlowState, r: float) -> float:
    return float(np.max(local_energy_map(state.u, state.g, r)))


# --- uniqueness experiment -------------------------------------------------------------


@dataclass
class UniquenessReport:
    eps: float
    perturb: str
    times: np.ndarray
    w_l2: np.ndarray
    param_distance: np.ndarray
    psi: np.ndarray

    @property
    def sup_w(self) -> float:
        return float(np.max(self.w_l2))

    @property
    def sup_param(self) -> float:
        return float(np.max(self.param_distance))

    @property
    def psi_integral(self) -> float:
        t, p = self.times, self.psi
        return float(np.sum(0.5 * (p[1:] + p[:-1]) * np.diff(t)))


def smooth_perturbation(shape, K: int, eps: float, seed: int = 0, modes: int = 3) -> np.ndarray:
    """Random low-mode trigonometric field with sup norm ``eps``."""
    rng = np.random.default_rng(seed)
    nx, ny = shape
    x = (np.arange(nx) + 0.5) / nx
    y = (np.arange(ny) + 0.5) / ny
    X, Y = np.meshgrid(x, y, indexing="ij")
    out = np.zeros((K,) + tuple(shape))
    for c in range(K):
        for m in range(-modes, modes + 1):
            for n in range(-modes, modes + 1):
                amp, ph = rng.standard_normal(), rng.uniform(0, 2 * np.pi)
                out[c] += amp * np.cos(2 * np.pi * (m * X + n * Y) + ph)
    s = np.max(np.abs(out))
    return out * (eps / s) if s > 0 else out


def _run(state: FlowState, cfg: FlowConfig, steps: int) -> list[FlowState]:
    traj = [state]
    for _ in range(steps):
        if traj[-1].halted:
            break
        traj.append(step_coupled(traj[-1], cfg))
    return traj


def dual_run_uniqueness(
    state: FlowState,
    cfg: FlowConfig,
    eps: float,
    T: float,
    perturb: str = "u",
    seed: int = 0,
) -> UniquenessReport:
    """Run the flow from ``state`` and from a perturbed copy concurrently and compare."""
    if perturb == "u":
        du = smooth_perturbation(state.u.shape[1:], state.u.shape[0], eps, seed)
        u2 = state.target.project(state.u + du) if eps else state.u
        other = make_state(u2, state.g, state.target, state.eta, t=state.t)
    elif perturb == "b":
        t0 = state.teich
        g2 = MetricField.from_teich(state.g.grid, TeichParams(t0.a, t0.b + eps))
        other = make_state(state.u, g2, state.target, state.eta, t=state.t)
    else:
        raise ValueError(f"unknown perturbation {perturb!r}")
    steps = int(round(T / cfg.dt))
    with ThreadPoolExecutor(max_workers=2) as pool:
        f1 = pool.submit(_run, state, cfg, steps)
        f2 = pool.submit(_run, other, cfg, steps)
        tr1, tr2 = f1.result(), f2.result()
    n = min(len(tr1), len(tr2))
    g0 = state.g
    times, w, d, psi = [], [], [], []
    for s1, s2 in zip(tr1[:n], tr2[:n]):
        diff = s1.u - s2.u
        times.append(s1.t)
        w.append(math.sqrt(scalar_l2(g0, diff, diff)))
        d.append(math.hypot(s1.teich.a - s2.teich.a, s1.teich.b - s2.teich.b))
        grad = np.maximum(2 * energy_density(s1.u, s1.g), 2 * energy_density(s2.u, s2.g))
        psi.append(integrate(g0, grad ** 2) + 1.0)
    return UniquenessReport(eps, perturb, np.array(times), np.array(w), np.array(d), np.array(psi))
