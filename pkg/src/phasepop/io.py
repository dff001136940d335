"""CSV artifacts.

Numbers are written with Python's shortest round-trip ``repr`` so output is
byte-stable and a read/write cycle reproduces the file exactly.

Field layout::

    # axes: n[0.0,60.0,601];alpha[0.0,60.0,601]
    n,alpha,u
    0.0,0.0,0.0
    0.1,0.0,0.0
    ...

Rows are ordered with ``n`` varying fastest, so the ``u`` column of a 2D
field reshapes to a matrix with one row per alpha node and one column per n
node.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .grid import Axis, Field, PhaseGrid

_AXIS_RE = re.compile(r"(\w+)\[([^,\]]+),([^,\]]+),(\d+)\]")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return repr(float(x))


def _write(path, lines):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def write_rows(path, columns, rows):
    _write(path, [",".join(columns)] + [",".join(fmt(v) for v in row) for row in rows])


def grid_header(grid: PhaseGrid) -> str:
    return "# axes: " + ";".join(f"{a.name}[{fmt(a.lo)},{fmt(a.hi)},{a.count}]" for a in grid.axes)


def write_field(path, f: Field):
    grid = f.grid
    # transpose so n varies fastest in C order
    coords = [m.transpose().ravel() for m in grid.mesh()]
    vals = f.values.transpose().ravel()
    cols = [[repr(float(x)) for x in c] for c in coords] + [[repr(float(x)) for x in vals]]
    lines = [grid_header(grid), ",".join(grid.names + ("u",))]
    lines.extend(",".join(parts) for parts in zip(*cols))
    _write(path, lines)


def read_field(path) -> Field:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# axes:"):
            raise ValueError(f"{path}: missing '# axes:' header")
        axes = []
        for spec in header[len("# axes:"):].strip().split(";"):
            m = _AXIS_RE.fullmatch(spec.strip())
            if not m:
                raise ValueError(f"{path}: bad axis spec {spec!r}")
            axes.append(Axis(m.group(1), float(m.group(2)), float(m.group(3)), int(m.group(4))))
        grid = PhaseGrid(tuple(axes))
        columns = fh.readline().strip().split(",")
        if tuple(columns) != grid.names + ("u",):
            raise ValueError(f"{path}: column header {columns} does not match axes {grid.names}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[0] != int(np.prod(grid.shape)):
        raise ValueError(f"{path}: expected {int(np.prod(grid.shape))} rows, found {data.shape[0]}")
    values = data[:, -1].reshape(grid.shape[::-1]).transpose()
    return Field(grid, values)


def write_series(path, columns, series):
    write_rows(path, columns, np.asarray(series).tolist())


def write_ensemble(path, ens):
    write_rows(path, ens.names, ens.points.tolist())


def write_histogram(path, hist):
    e = hist.bin_edges
    write_rows(path, ("bin_lo", "bin_hi", "density"), zip(e[:-1], e[1:], hist.densities))
