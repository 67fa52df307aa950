"""VSF1 snapshot files.

Layout (little-endian): a 20-byte header ``b"VSF1"``, ``dim``, ``n``,
``ncomp`` (uint32 each) and the dtype tag ``b"f8LE"``, followed by the real
grid samples of every component, row-major, components in the order
``v_0 .. v_{N-1}, E_00, E_01, .., E_{N-1,N-1}``.  A JSON sidecar
``<name>.json`` carries ``t``, ``dt``, ``scheme`` and accumulated time norms.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from oldroyd import spectral as sp
from oldroyd.spectral import get_grid
from oldroyd.system import State

MAGIC = b"VSF1"
DTYPE_TAG = b"f8LE"
HEADER = struct.Struct("<4sIII4s")


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_snapshot(path, state: State, dt: float, scheme: str, time_norms: dict | None = None) -> Path:
    grid = state.grid
    n = grid.dim
    fields = np.concatenate([state.v, state.E.reshape((n * n,) + grid.shape)])
    samples = sp.inverse_transform(grid, fields)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, grid.dim, grid.n, fields.shape[0], DTYPE_TAG))
        fh.write(np.ascontiguousarray(samples, dtype="<f8").tobytes())
    meta = {"t": state.t, "dt": dt, "scheme": scheme, "time_norms": time_norms or {}}
    sidecar_path(path).write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return path


def read_snapshot(path) -> tuple[State, dict]:
    path = Path(path)
    raw = path.read_bytes()
    magic, dim, n, ncomp, tag = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a VSF1 file")
    if tag != DTYPE_TAG:
        raise ValueError(f"{path}: unsupported sample type {tag!r}")
    if ncomp != dim + dim * dim:
        raise ValueError(f"{path}: expected {dim + dim * dim} components, found {ncomp}")
    grid = get_grid(dim, n)
    samples = np.frombuffer(raw, dtype="<f8", offset=HEADER.size)
    if samples.size != ncomp * n**dim:
        raise ValueError(f"{path}: truncated sample block")
    samples = samples.reshape((ncomp,) + grid.shape)
    coef = sp.transform(grid, samples)
    v = coef[:dim]
    E = coef[dim:].reshape((dim, dim) + grid.shape)
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    return State(grid, v, E, float(meta.get("t", 0.0))), meta
