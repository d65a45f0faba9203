"""Run configuration: a flat ``key = value`` text format with dotted sections.

Example::

    # square torus, circle map
    grid.nx = 64
    grid.ny = 64
    init.scenario = equator
    flow.dt = 1e-4

Blank lines and ``#`` comments are ignored.  Every key may appear once.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .flow import FlowConfig
from .metric import Grid, TeichParams
from .scenarios import SCENARIOS
from .targets import TargetManifold, make_target


class ConfigError(ValueError):
    pass


def _float(v: str) -> float:
    return float(v)


def _int(v: str) -> int:
    return int(v)


def _floats(v: str) -> tuple:
    return tuple(float(x) for x in v.split(",") if x.strip())


def _ints(v: str) -> tuple:
    return tuple(int(x) for x in v.split(",") if x.strip())


def _opt_float(v: str):
    return None if v.lower() in ("none", "") else float(v)


def _str(v: str) -> str:
    return v


# key -> (parser, default)
SCHEMA = {
    "grid.nx": (_int, None),
    "grid.ny": (_int, None),
    "target.name": (_str, "sphere"),
    "target.R": (_float, 2.0),
    "target.r": (_float, 0.5),
    "target.band": (_opt_float, None),
    "init.scenario": (_str, None),
    "init.axis": (_str, "x"),
    "init.eps": (_float, 0.1),
    "init.center": (_floats, (0.5, 0.5)),
    "init.radius": (_float, 0.05),
    "init.scale": (_float, 0.02),
    "init.path": (_str, ""),
    "teich.a": (_float, 0.0),
    "teich.b": (_float, 1.0),
    "flow.dt": (_float, 1e-4),
    "flow.eta": (_float, 2.0),
    "flow.picard_iters": (_int, 8),
    "flow.picard_tol": (_float, 1e-12),
    "flow.concentration_threshold": (_float, 0.3),
    "flow.concentration_radii": (_floats, (0.2, 0.1, 0.05)),
    "flow.systole_floor": (_float, 0.1),
    "flow.max_steps": (_int, 1000),
    "flow.t_end": (_opt_float, None),
    "flow.metric_substep": (_str, "params"),
    "output.dir": (_str, "out"),
    "output.cadence": (_int, 10),
    "seed": (_int, 0),
    "study.grids": (_ints, (32, 64, 128)),
    "study.dts": (_floats, (1e-4, 5e-5, 2.5e-5)),
    "probe.samples": (_int, 20),
    "probe.delta": (_float, 1e-3),
}
REQUIRED = ("grid.nx", "grid.ny", "init.scenario")


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    target_name: str
    target_params: dict
    scenario: str
    scenario_params: dict
    teich: TeichParams
    flow: FlowConfig
    out_dir: str = "out"
    cadence: int = 10
    seed: int = 0
    study_grids: tuple = (32, 64, 128)
    study_dts: tuple = (1e-4, 5e-5, 2.5e-5)
    probe_samples: int = 20
    probe_delta: float = 1e-3
    values: dict = field(default_factory=dict, compare=False)

    def make_target(self) -> TargetManifold:
        return make_target(self.target_name, **self.target_params)

    def echo(self) -> dict:
        """All settings (defaults included) keyed as in the text format."""
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.values.items()}

    def to_text(self) -> str:
        lines = []
        for k, v in self.values.items():
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            elif v is None:
                v = "none"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, **kv) -> "RunConfig":
        vals = dict(self.values)
        vals.update(kv)
        return build_config(vals)


def parse_pairs(text: str) -> dict:
    """Key/value pairs with syntax checks; values stay strings."""
    seen: dict[str, int] = {}
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or any(c.isspace() for c in key):
            raise ConfigError(f"line {n}: malformed key {key!r}")
        if key in seen:
            raise ConfigError(f"line {n}: duplicate key {key!r} (first set on line {seen[key]})")
        if key not in SCHEMA:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        seen[key] = n
        out[key] = value
    return out


def parse_config(text: str) -> RunConfig:
    pairs = parse_pairs(text)
    values = {}
    for key, raw in pairs.items():
        parser, _ = SCHEMA[key]
        try:
            values[key] = parser(raw)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse value {raw!r}") from None
    return build_config(values)


def build_config(values: dict) -> RunConfig:
    """Validate typed values, fill in defaults and assemble a :class:`RunConfig`."""
    for key in values:
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"{key}: required key missing")
    full = {k: values.get(k, d) for k, (_, d) in SCHEMA.items()}
    v = full

    def guard(key, fn):
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{key}: {exc}") from None

    grid = guard("grid.nx", lambda: Grid(v["grid.nx"], v["grid.ny"]))
    if v["target.name"] not in ("sphere", "torus"):
        raise ConfigError(f"target.name: unknown target {v['target.name']!r} (expected sphere or torus)")
    if v["target.name"] == "torus":
        tparams = {"R": v["target.R"], "r": v["target.r"]}
        if v["target.band"] is not None:
            tparams["band"] = v["target.band"]
    else:
        tparams = {} if v["target.band"] is None else {"band": v["target.band"]}
    guard("target.name", lambda: make_target(v["target.name"], **tparams))
    if v["init.scenario"] not in SCENARIOS:
        raise ConfigError(f"init.scenario: unknown scenario {v['init.scenario']!r}; expected one of {', '.join(SCENARIOS)}")
    if v["init.axis"] not in ("x", "y"):
        raise ConfigError("init.axis: must be x or y")
    if len(v["init.center"]) != 2:
        raise ConfigError("init.center: needs two coordinates")
    sparams = {
        "constant": {},
        "equator": {"axis": v["init.axis"]},
        "spiral": {"eps": v["init.eps"]},
        "bump": {"center": v["init.center"], "radius": v["init.radius"], "scale": v["init.scale"]},
        "wrap": {},
        "file": {"path": v["init.path"]},
    }[v["init.scenario"]]
    teich = guard("teich.b", lambda: TeichParams(v["teich.a"], v["teich.b"]))
    flow_kw = {f.name: v[f"flow.{f.name}"] for f in dataclasses.fields(FlowConfig)}
    try:
        flow = FlowConfig(**flow_kw)
    except ValueError as exc:
        # FlowConfig messages start with the offending field name
        raise ConfigError(f"flow.{str(exc).split()[0]}: {exc}") from None
    if v["output.cadence"] < 1:
        raise ConfigError("output.cadence: must be at least 1")
    if len(v["study.grids"]) < 3 or len(v["study.dts"]) < 3:
        raise ConfigError("study.grids, study.dts: need at least three entries each")
    if v["probe.samples"] < 1 or not v["probe.delta"] > 0:
        raise ConfigError("probe.samples, probe.delta: must be positive")
    return RunConfig(
        grid=grid,
        target_name=v["target.name"],
        target_params=tparams,
        scenario=v["init.scenario"],
        scenario_params=sparams,
        teich=teich,
        flow=flow,
        out_dir=v["output.dir"],
        cadence=v["output.cadence"],
        seed=v["seed"],
        study_grids=tuple(v["study.grids"]),
        study_dts=tuple(v["study.dts"]),
        probe_samples=v["probe.samples"],
        probe_delta=v["probe.delta"],
        values=full,
    )
