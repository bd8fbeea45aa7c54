"""CSV and JSON serialization.

Field CSVs carry one ``# {json}`` metadata line (grid, kind), a commented
column header, then rows ``t, x[, y], value`` at 17 significant digits.
All writes go to a temporary file first and are renamed into place.
"""

from __future__ import annotations

import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import Field, Grid, SpaceTimeField

FMT = "%.17g"


def atomic_write(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan
        return x if math.isfinite(x) else str(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps(obj))


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def _rows(grid: Grid, times: np.ndarray, values: np.ndarray) -> np.ndarray:
    nodes = grid.nodes().reshape(-1, grid.dim)
    blocks = []
    for t, v in zip(times, values):
        tcol = np.full((nodes.shape[0], 1), t)
        blocks.append(np.hstack([tcol, nodes, v.reshape(-1, 1)]))
    return np.vstack(blocks)


def field_csv_text(F: Field | SpaceTimeField, time: float = 0.0, meta: dict | None = None) -> str:
    if isinstance(F, Field):
        times, values, kind = np.array([time]), F.values[None], "field"
    else:
        times, values, kind = F.times, F.values, "space_time"
    grid = F.grid
    header = {"kind": kind, "grid": grid.to_dict(), "times": int(times.size)}
    if meta:
        header["meta"] = _jsonable(meta)
    cols = ["t", "x", "y"][: grid.dim + 1] + ["value"]
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    buf.write("# " + ",".join(cols) + "\n")
    np.savetxt(buf, _rows(grid, times, values), fmt=FMT, delimiter=",")
    return buf.getvalue()


def write_field_csv(path, F: Field | SpaceTimeField, time: float = 0.0, meta: dict | None = None) -> Path:
    return atomic_write(path, field_csv_text(F, time, meta))


def _header(path) -> dict | None:
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("#"):
        try:
            return json.loads(first[1:])
        except json.JSONDecodeError:
            return None
    return None


def read_field_csv(path) -> SpaceTimeField:
    """Read a field CSV back as a :class:`SpaceTimeField` (one slice for a plain field).

    Without the metadata line the grid is inferred from the coordinate
    columns, assuming the cell length is ``n*h``.
    """
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    header = _header(path)
    if header and "grid" in header:
        g = header["grid"]
        grid = Grid(tuple(g["lengths"]), tuple(g["n"]))
    else:
        dim = data.shape[1] - 2
        coords = [np.unique(data[:, 1 + d]) for d in range(dim)]
        n = tuple(c.size for c in coords)
        lengths = tuple(c.size * (c[1] - c[0]) for c in coords)
        grid = Grid(lengths, n)
    times = np.unique(data[:, 0])
    values = data[:, -1].reshape((times.size,) + grid.shape)
    meta = header.get("meta", {}) if header else {}
    return SpaceTimeField(grid, times, values, meta)


def bundle_csv_text(bundle) -> str:
    """Rows ``t, seed, X[, Y], grad[, grad_y]`` for a characteristic bundle."""
    D = bundle.grid.dim
    K, J = bundle.paths.shape[:2]
    t = np.repeat(bundle.times, J)[:, None]
    seed = np.tile(np.arange(J), K)[:, None]
    rows = np.hstack([t, seed, bundle.paths.reshape(-1, D), bundle.grad_along.reshape(-1, D)])
    cols = ["t", "seed"] + (["X"] if D == 1 else ["X", "Y"]) + \
        (["grad_along"] if D == 1 else ["grad_along_x", "grad_along_y"])
    buf = io.StringIO()
    buf.write("# " + ",".join(cols) + "\n")
    np.savetxt(buf, rows, fmt=FMT, delimiter=",")
    return buf.getvalue()
