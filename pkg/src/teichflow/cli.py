"""Command line interface: ``teichflow {run,study,probe,check}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .flow import FlowConfig, make_state, step_coupled
from .grid import inner_l2
from .linsolve import SolverError
from .metric import MetricField, TeichParams
from .projection import horizontal_basis, project_basis, project_decomposition, projection_lipschitz_probe
from .runner import EXIT_CONFIG, EXIT_ENGINE, EXIT_OK, convergence_study, run_scenario
from .scenarios import equator_map
from .targets import Sphere, tension_field
from .tensors import divergence, energy_metric_gradient_check, trace

log = logging.getLogger("teichflow")


def load_config(args) -> RunConfig:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    cfg = parse_config(text)
    over = {}
    if args.out is not None:
        over["output.dir"] = args.out
    if args.seed is not None:
        over["seed"] = args.seed
    if args.steps is not None:
        if args.steps < 0:
            raise ConfigError("--steps: must be non-negative")
        over["flow.max_steps"] = args.steps
    return cfg.with_overrides(**over) if over else cfg


def cmd_run(cfg: RunConfig) -> int:
    summary = run_scenario(cfg)
    print(f"{summary.status}: {summary.steps} steps, E {summary.initial_E!r} -> {summary.final_E!r}, "
          f"(a, b) = ({summary.final_a!r}, {summary.final_b!r})")
    if summary.error:
        print(summary.error, file=sys.stderr)
    return summary.exit_code


def cmd_study(cfg: RunConfig) -> int:
    rep = convergence_study(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "study.json").write_text(json.dumps(rep.as_dict(), indent=2) + "\n")
    d = rep.as_dict()
    print(f"dt slope {d['dt_slope']}, h slope {d['h_slope']}")
    return EXIT_OK


def cmd_probe(cfg: RunConfig) -> int:
    t1 = cfg.teich
    t2 = TeichParams(t1.a, t1.b + cfg.probe_delta)
    g1 = MetricField.from_teich(cfg.grid, t1)
    g2 = MetricField.from_teich(cfg.grid, t2)
    rep = projection_lipschitz_probe(g1, g2, cfg.probe_samples, np.random.default_rng(cfg.seed))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    body = {
        "samples": rep.samples,
        "max_ratio": rep.max_ratio,
        "mean_ratio": rep.mean_ratio,
        "max_hs_l2_ratio": rep.max_hs_l2_ratio,
        "params": [list(t1.as_tuple()), list(t2.as_tuple())],
    }
    (out / "probe.json").write_text(json.dumps(body, indent=2) + "\n")
    print(f"Lipschitz ratio: max {rep.max_ratio:.6g}, mean {rep.mean_ratio:.6g}")
    return EXIT_OK


def invariant_checks(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    """Quick self-test on the configured grid and metric."""
    rng = np.random.default_rng(cfg.seed)
    g = MetricField.from_teich(cfg.grid, cfg.teich)
    out = []
    k = rng.standard_normal((3,) + cfg.grid.shape)
    P = project_basis(g, k)
    D = project_decomposition(g, k)
    idem = np.max(np.abs(project_basis(g, P) - P))
    out.append(("projection idempotent", idem < 1e-8, f"{idem:.2e}"))
    tr = np.max(np.abs(trace(g, P)))
    out.append(("projection trace-free", tr < 1e-8, f"{tr:.2e}"))
    dv = np.max(np.abs(divergence(g, P)))
    out.append(("projection divergence-free", dv < 1e-8, f"{dv:.2e}"))
    orth = max(abs(inner_l2(g, k - P, t)) for t in horizontal_basis(g).theta)
    out.append(("residual orthogonal to H(g)", orth < 1e-8, f"{orth:.2e}"))
    agree = np.max(np.abs(P - D.P))
    out.append(("basis and decomposition agree", agree < 1e-8, f"{agree:.2e}"))
    u = equator_map(cfg.grid)
    gaps = [energy_metric_gradient_check(u, g, k, s).gap for s in (1e-2, 1e-3)]
    ok = gaps[1] < gaps[0] / 50 or gaps[0] < 1e-10
    out.append(("metric gradient identity", ok, f"gaps {gaps[0]:.2e}, {gaps[1]:.2e}"))
    sphere = Sphere()
    tau = np.max(np.abs(tension_field(sphere, u, g)))
    out.append(("equator map harmonic", tau < 1e-8, f"{tau:.2e}"))
    s0 = make_state(u, g, sphere, cfg.flow.eta)
    s1 = step_coupled(s0, FlowConfig(dt=cfg.flow.dt, eta=cfg.flow.eta))
    dec = s1.E <= s0.E + 1e-8 * (1 + s0.E)
    out.append(("energy non-increasing over one step", dec, f"dE {s1.E - s0.E:.3e}"))
    det = np.max(np.abs(s1.g.det - 1))
    out.append(("unit determinant after a step", det < 1e-12, f"{det:.2e}"))
    return out


def cmd_check(cfg: RunConfig) -> int:
    results = invariant_checks(cfg)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_ENGINE


COMMANDS = {"run": cmd_run, "study": cmd_study, "probe": cmd_probe, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="teichflow", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="path to the key = value config file")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, help="seed for randomised probes (overrides seed)")
        sp.add_argument("--steps", type=int, help="number of steps (overrides flow.max_steps)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except (SolverError, RuntimeError, ValueError) as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
