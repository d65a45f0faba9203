"""CSV time series and binary checkpoints.

Floats are written in Python's shortest round-trip form, so reloading a CSV
gives back the exact doubles.  A checkpoint is::

    magic  b"TFCKPT\\0\\0"   (8 bytes)
    version                  (uint16, little endian)
    header length            (uint32, little endian)
    header                   (UTF-8 JSON)
    u, then metric comps     (little-endian float64, C order)
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import struct
from pathlib import Path
from typing import Iterable

import numpy as np

from .flow import Event, FlowState, make_state
from .metric import MetricField, TeichParams, grid_of
from .targets import make_target, TorusOfRevolution

COLUMNS = (
    "step",
    "t",
    "E",
    "tension_l2sq",
    "horiz_hopf_l2sq",
    "energy_identity_residual",
    "a",
    "b",
    "systole",
    "max_local_energy",
)

MAGIC = b"TFCKPT\0\0"
VERSION = 1


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


class SeriesWriter:
    """Single-writer CSV sink with the fixed column set."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            self._fh = open(self.path, "w", newline="")
        except OSError as exc:
            raise OSError(f"cannot open series file {self.path}: {exc}") from exc
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(COLUMNS)
        self.rows = 0

    def write(self, row: dict):
        self._w.writerow([_fmt(row[c]) for c in COLUMNS])
        self.rows += 1

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def emit_series(path, rows: Iterable[dict]) -> int:
    """Write ``rows`` (dicts keyed by :data:`COLUMNS`) and return the row count."""
    with SeriesWriter(path) as w:
        for r in rows:
            w.write(r)
        return w.rows


def read_series(path) -> list[dict]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != COLUMNS:
            raise ValueError(f"{path}: unexpected columns {rd.fieldnames}")
        return [{k: (int(v) if k == "step" else float(v)) for k, v in r.items()} for r in rd]


# --- checkpoints -------------------------------------------------------------------


def target_spec(target) -> dict:
    name = "torus" if isinstance(target, TorusOfRevolution) else "sphere"
    return {"name": name, "params": dataclasses.asdict(target)}


def write_checkpoint(path, state: FlowState):
    """Serialise ``state``; reloading reproduces it bit for bit."""
    teich = state.teich
    header = {
        "t": state.t,
        "step": state.step,
        "eta": state.eta,
        "a": teich.a,
        "b": teich.b,
        "target": target_spec(state.target),
        "u_shape": list(state.u.shape),
        "halted": state.halted,
        "picard_gaps": list(state.picard_gaps),
        "events": [dataclasses.asdict(e) for e in state.events],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<HI", VERSION, len(blob)))
            fh.write(blob)
            fh.write(np.ascontiguousarray(state.u, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(state.g.comps, dtype="<f8").tobytes())
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> FlowState:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read checkpoint {path}: {exc}") from exc
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, n = struct.unpack("<HI", data[8:14])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[14 : 14 + n].decode())
    shape = tuple(header["u_shape"])
    size = int(np.prod(shape))
    off = 14 + n
    u = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).astype(float)
    off += 8 * size
    comps = np.frombuffer(data, dtype="<f8", count=3 * size // shape[0], offset=off)
    comps = comps.reshape((3,) + shape[1:]).astype(float)
    teich = TeichParams(header["a"], header["b"])
    g = MetricField.from_teich(grid_of(u), teich)
    if not np.array_equal(g.comps, comps):
        raise ValueError(f"{path}: stored metric does not match its parameters")
    spec = header["target"]
    target = make_target(spec["name"], **spec["params"])
    events = tuple(Event(**e) for e in header["events"])
    return make_state(
        u,
        g,
        target,
        header["eta"],
        t=header["t"],
        step=header["step"],
        events=events,
        picard_gaps=tuple(header["picard_gaps"]),
        halted=header["halted"],
    )
