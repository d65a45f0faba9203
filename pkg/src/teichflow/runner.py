"""Scenario execution, run summaries and the convergence study."""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .flow import (
    Event,
    FlowError,
    FlowState,
    detect_concentration,
    energy_identity_residual,
    make_state,
    max_local_energy,
    step_coupled,
)
from .linsolve import SolverError
from .metric import MetricField, build_grid
from .scenarios import initial_map
from .storage import SeriesWriter, write_checkpoint
from .targets import OffManifoldError

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_ENGINE, EXIT_HALT = 0, 2, 3, 4


def energy_tolerance(E: float) -> float:
    """Per-step allowance for energy increase (rounding)."""
    return 1e-8 * (1.0 + E)


def initial_state(cfg: RunConfig, grid=None) -> FlowState:
    grid = grid or cfg.grid
    target = cfg.make_target()
    g = MetricField.from_teich(grid, cfg.teich)
    u = initial_map(cfg.scenario, grid, target, cfg.teich, **cfg.scenario_params)
    return make_state(u, g, target, cfg.flow.eta)


@dataclass
class RunSummary:
    status: str
    exit_code: int
    steps: int
    initial_E: float
    final_E: float
    final_t: float
    final_a: float
    final_b: float
    wp_length: float
    events: list
    wall_time: float
    config: dict
    code_version: str = __version__
    error: str | None = None
    rows: int = 0
    max_energy_increase: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _row(prev: FlowState | None, s: FlowState, cfg: RunConfig) -> dict:
    t = s.teich
    return {
        "step": s.step,
        "t": s.t,
        "E": s.E,
        "tension_l2sq": s.tension_l2sq,
        "horiz_hopf_l2sq": s.horiz_hopf_l2sq,
        "energy_identity_residual": float("nan") if prev is None else energy_identity_residual(prev, s, cfg.flow),
        "a": t.a,
        "b": t.b,
        "systole": t.systole(),
        "max_local_energy": max_local_energy(s, min(cfg.flow.concentration_radii)),
    }


def run_scenario(
    cfg: RunConfig,
    out_dir=None,
    state: FlowState | None = None,
    keep_states: bool = False,
    write_files: bool = True,
):
    """Integrate until ``max_steps``, a halt event or ``t_end``.

    Writes ``series.csv``, ``summary.json`` and ``final.ckpt`` to the output
    directory (``cfg.out_dir`` unless overridden).  Returns the summary, and
    with ``keep_states`` also the list of emitted states.
    """
    t0 = time.perf_counter()
    fc = cfg.flow
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    writer = None
    if write_files:
        out.mkdir(parents=True, exist_ok=True)
        writer = SeriesWriter(out / "series.csv")
    s = state if state is not None else initial_state(cfg)
    E0 = s.E
    start_step = s.step
    events: list[Event] = []
    kept = [s]
    wp = 0.0
    max_inc = -math.inf
    status, code, err = "ok", EXIT_OK, None
    concentrated = False

    def emit(prev, cur):
        nonlocal concentrated
        if writer is not None:
            writer.write(_row(prev, cur, cfg))
        rep = detect_concentration(cur, fc) if min(fc.concentration_radii) * 2 < cur.teich.systole() else None
        flagged = bool(rep and rep.points)
        if flagged and not concentrated:
            events.append(Event("concentration", cur.step, cur.t, rep.as_dict()))
        concentrated = flagged

    try:
        emit(None, s)
        while s.step - start_step < fc.max_steps and not s.halted:
            if fc.t_end is not None and s.t >= fc.t_end - 1e-12 * max(1.0, abs(fc.t_end)):
                break
            nxt = step_coupled(s, fc)
            inc = nxt.E - s.E
            max_inc = max(max_inc, inc)
            if inc > energy_tolerance(s.E):
                events.append(Event("energy_increase", nxt.step, nxt.t, {"increase": inc}))
            # half the L2 length of the metric path, trapezoid rule
            wp += 0.25 * (s.metric_speed + nxt.metric_speed) * (nxt.t - s.t)
            prev, s = s, nxt
            if (s.step - start_step) % cfg.cadence == 0:
                emit(prev, s)
                if keep_states:
                    kept.append(s)
        new = [e for e in s.events if e.kind == "halt_systole"]
        events.extend(new)
        if s.halted:
            status, code = "halted", EXIT_HALT
    except (FlowError, OffManifoldError, SolverError, FloatingPointError) as exc:
        status, code, err = "error", EXIT_ENGINE, f"{type(exc).__name__}: {exc}"
        events.append(Event("error", s.step + 1, s.t, {"message": str(exc)}))
        log.error("engine error at step %d: %s", s.step + 1, exc)
    finally:
        if writer is not None:
            writer.close()
    summary = RunSummary(
        status=status,
        exit_code=code,
        steps=s.step - start_step,
        initial_E=E0,
        final_E=s.E,
        final_t=s.t,
        final_a=s.teich.a,
        final_b=s.teich.b,
        wp_length=wp,
        events=[e.as_dict() for e in sorted(events, key=lambda e: e.step)],
        wall_time=time.perf_counter() - t0,
        config=cfg.echo(),
        error=err,
        rows=writer.rows if writer is not None else 0,
        max_energy_increase=max_inc if max_inc > -math.inf else 0.0,
    )
    if write_files:
        (out / "summary.json").write_text(summary.to_json() + "\n")
        write_checkpoint(out / "final.ckpt", s)
    if keep_states:
        return summary, kept
    return summary


# --- convergence study -----------------------------------------------------------------


def reference_dissipation(cfg: RunConfig) -> float | None:
    """Closed-form dE/dt at t = 0 where one is known, else ``None``.

    For the circle maps on ``g(0, b)`` the energy is ``2 pi^2 b`` (axis x) or
    ``2 pi^2 / b`` (axis y) and the metric equation gives ``db/dt = -eta^2 pi^2 b^2``
    respectively ``+eta^2 pi^2``; in both cases ``dE/dt = -2 eta^2 pi^4 b^{+-2}``.
    """
    eta, t = cfg.flow.eta, cfg.teich
    if cfg.scenario == "constant":
        return 0.0
    if cfg.scenario == "equator" and cfg.target_name == "sphere" and t.a == 0.0:
        p = 2 if cfg.scenario_params.get("axis", "x") == "x" else -2
        return -2.0 * eta ** 2 * math.pi ** 4 * t.b ** p
    return None


def loglog_slope(x, y) -> float | None:
    """Least-squares slope of ``log y`` against ``log x``; ``None`` when all ``y`` vanish."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.all(y == 0):
        return None
    if np.any(y <= 0):
        return float("nan")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class StudyReport:
    dts: list
    dt_residuals: list
    dt_slope: float | None
    grids: list
    h: list
    h_residuals: list
    h_slope: float | None
    h_dt: float
    reference: float | None
    notes: list = field(default_factory=list)

    @property
    def exact(self) -> bool:
        return self.dt_slope is None and self.h_slope is None

    def as_dict(self) -> dict:
        d = asdict(self)
        d["dt_slope"] = "exact" if self.dt_slope is None else self.dt_slope
        d["h_slope"] = "exact" if self.h_slope is None else self.h_slope
        return d


def _one_step(cfg: RunConfig, n: int, dt: float):
    grid = build_grid(n, n)
    s0 = initial_state(cfg, grid)
    s1 = step_coupled(s0, cfg.flow, dt)
    return s0, s1


def convergence_study(cfg: RunConfig, grids=None, dts=None, workers: int = 4) -> StudyReport:
    """Order of accuracy of the energy identity.

    * time: the energy-identity residual of one step from the initial data,
      on ``cfg.grid``, for each ``dt``;
    * space: one step of a tiny ``dt`` on each grid (square, ``n x n``); the
      residual is the gap between the measured ``dE/dt`` and the closed-form
      dissipation when one is known, otherwise the value on the finest grid.
    """
    grids = list(grids or cfg.study_grids)
    dts = list(dts or cfg.study_dts)
    if len(grids) < 3 or len(dts) < 3:
        raise ValueError("convergence_study needs at least three grids and three time steps")
    notes = []

    def dt_cell(dt):
        s0 = initial_state(cfg)
        s1 = step_coupled(s0, cfg.flow, dt)
        return energy_identity_residual(s0, s1, cfg.flow)

    h_dt = min(dts) * 1e-3

    def h_cell(n):
        s0, s1 = _one_step(cfg, n, h_dt)
        return (s1.E - s0.E) / (s1.t - s0.t)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        dt_res = list(pool.map(dt_cell, dts))
        rates = list(pool.map(h_cell, grids))
    ref = reference_dissipation(cfg)
    hs = [1.0 / n for n in grids]
    if ref is None:
        order = np.argsort(grids)
        finest = int(order[-1])
        ref_val = rates[finest]
        notes.append(f"no closed-form dissipation; residuals relative to the {grids[finest]}^2 grid")
        keep = [i for i in range(len(grids)) if i != finest]
        h_res = [abs(rates[i] - ref_val) for i in keep]
        h_used = [hs[i] for i in keep]
    else:
        h_res = [abs(r - ref) for r in rates]
        h_used = hs
    return StudyReport(
        dts=dts,
        dt_residuals=dt_res,
        dt_slope=loglog_slope(dts, dt_res),
        grids=grids,
        h=h_used,
        h_residuals=h_res,
        h_slope=loglog_slope(h_used, h_res),
        h_dt=h_dt,
        reference=ref,
        notes=notes,
    )
