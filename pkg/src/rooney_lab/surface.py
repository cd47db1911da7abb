"""Sweeps of the decision threshold beta*(alpha, delta) over a parameter grid.

A cell holds either a finite beta* (phi_k crosses 1 there) or a ``Marker``:
``NO_THRESHOLD`` when phi_k stays at or below 1 for every bias, and
``MULTI_CROSSING`` when the monotonicity check failed (k > 2 only).

Serialized forms:

* CSV, columns ``alpha,delta,k,beta_star``; ``inf`` marks NoThreshold and
  ``multi`` marks MultiCrossing.
* JSON, ``{"k": .., "alpha_axis": [..], "delta_axis": [..], "cells": [..]}``
  with one ``{"alpha", "delta", "beta_star"}`` or ``{"alpha", "delta", "marker"}``
  object per cell.
* A whitespace table for gnuplot (``inf``/``multi`` markers become ``NaN``,
  which gnuplot skips).

Cells are ordered row-major by alpha, then delta.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, MultiCrossing
from .rooney import Marker, beta_star, check_alpha, check_k
from .powerlaw import check_delta

DEFAULT_ALPHA_AXIS = tuple(np.geomspace(0.01, 1.0, 40).tolist())
DEFAULT_DELTA_AXIS = tuple(np.linspace(0.05, 4.0, 40).tolist())

_CSV_MARKERS = {Marker.NO_THRESHOLD: "inf", Marker.MULTI_CROSSING: "multi"}
_CSV_PARSE = {v: k for k, v in _CSV_MARKERS.items()}


@dataclass(frozen=True)
class SurfaceGrid:
    alpha_axis: tuple[float, ...]
    delta_axis: tuple[float, ...]
    k: int
    cells: tuple[tuple[float | Marker, ...], ...]  # cells[i][j] <-> (alpha_i, delta_j)

    def __post_init__(self):
        _check_axis(self.alpha_axis, "alpha")
        _check_axis(self.delta_axis, "delta")
        if len(self.cells) != len(self.alpha_axis) or any(
            len(row) != len(self.delta_axis) for row in self.cells
        ):
            raise DomainError("cell table does not match axes")

    def items(self):
        for i, alpha in enumerate(self.alpha_axis):
            for j, delta in enumerate(self.delta_axis):
                yield alpha, delta, self.cells[i][j]

    def count(self, kind) -> int:
        """Number of cells that are finite (``float``) or equal to a given marker."""
        if kind is float:
            return sum(isinstance(c, float) for _, _, c in self.items())
        return sum(c is kind for _, _, c in self.items())


def _check_axis(axis, name):
    if len(axis) == 0:
        raise DomainError(f"{name} axis is empty")
    if any(b <= a for a, b in zip(axis[:-1], axis[1:])):
        raise DomainError(f"{name} axis must be strictly increasing")


def _cell(alpha, delta, k):
    try:
        value = beta_star(alpha, delta, k)
    except MultiCrossing:
        return Marker.MULTI_CROSSING
    return value if isinstance(value, Marker) else float(value)


def sweep(alpha_axis=DEFAULT_ALPHA_AXIS, delta_axis=DEFAULT_DELTA_AXIS, k: int = 2, threads: int = 1) -> SurfaceGrid:
    """Evaluate beta* on every (alpha, delta) pair of the axes."""
    alpha_axis = tuple(check_alpha(a) for a in alpha_axis)
    delta_axis = tuple(check_delta(d) for d in delta_axis)
    _check_axis(alpha_axis, "alpha")
    _check_axis(delta_axis, "delta")
    k = check_k(k)
    pairs = [(a, d) for a in alpha_axis for d in delta_axis]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flat = list(pool.map(lambda p: _cell(p[0], p[1], k), pairs))
    else:
        flat = [_cell(a, d, k) for a, d in pairs]
    width = len(delta_axis)
    cells = tuple(tuple(flat[i * width:(i + 1) * width]) for i in range(len(alpha_axis)))
    return SurfaceGrid(alpha_axis, delta_axis, k, cells)


def to_csv(grid: SurfaceGrid) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["alpha", "delta", "k", "beta_star"])
    for alpha, delta, cell in grid.items():
        value = _CSV_MARKERS[cell] if isinstance(cell, Marker) else repr(cell)
        writer.writerow([repr(alpha), repr(delta), grid.k, value])
    return buf.getvalue()


def from_csv(text: str) -> SurfaceGrid:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["alpha", "delta", "k", "beta_star"]:
        raise ValueError("surface CSV must start with header alpha,delta,k,beta_star")
    entries = [(float(a), float(d), int(k), v) for a, d, k, v in rows[1:] if a]
    ks = {e[2] for e in entries}
    if len(ks) != 1:
        raise ValueError("surface CSV mixes several k values")
    alphas = tuple(sorted({e[0] for e in entries}))
    deltas = tuple(sorted({e[1] for e in entries}))
    table = {(e[0], e[1]): _CSV_PARSE.get(e[3]) or float(e[3]) for e in entries}
    if len(table) != len(alphas) * len(deltas):
        raise ValueError("surface CSV does not cover a full grid")
    cells = tuple(tuple(table[(a, d)] for d in deltas) for a in alphas)
    return SurfaceGrid(alphas, deltas, ks.pop(), cells)


def to_json(grid: SurfaceGrid) -> str:
    cells = []
    for alpha, delta, cell in grid.items():
        entry = {"alpha": alpha, "delta": delta}
        if isinstance(cell, Marker):
            entry["marker"] = cell.value
        else:
            entry["beta_star"] = cell
        cells.append(entry)
    doc = {
        "k": grid.k,
        "alpha_axis": list(grid.alpha_axis),
        "delta_axis": list(grid.delta_axis),
        "cells": cells,
    }
    return json.dumps(doc, indent=1)


def from_json(text: str) -> SurfaceGrid:
    doc = json.loads(text)
    alphas = tuple(doc["alpha_axis"])
    deltas = tuple(doc["delta_axis"])
    width = len(deltas)
    flat = [Marker(c["marker"]) if "marker" in c else float(c["beta_star"]) for c in doc["cells"]]
    if len(flat) != len(alphas) * width:
        raise ValueError("surface JSON cell count does not match axes")
    cells = tuple(tuple(flat[i * width:(i + 1) * width]) for i in range(len(alphas)))
    return SurfaceGrid(alphas, deltas, int(doc["k"]), cells)


def to_gnuplot(grid: SurfaceGrid) -> str:
    """Blank-line separated blocks per alpha, as ``splot ... with pm3d`` expects."""
    lines = [f"# alpha delta beta_star   (k={grid.k}; NaN = no finite threshold)"]
    for i, alpha in enumerate(grid.alpha_axis):
        for j, delta in enumerate(grid.delta_axis):
            cell = grid.cells[i][j]
            value = "NaN" if isinstance(cell, Marker) else repr(cell)
            lines.append(f"{alpha!r} {delta!r} {value}")
        lines.append("")
    return "\n".join(lines) + "\n"


WRITERS = {"csv": to_csv, "json": to_json, "gnuplot": to_gnuplot}


def write_atomic(path, text: str) -> None:
    """Write through a temp file in the target directory, then rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def verify_cells(grid: SurfaceGrid) -> float:
    """Largest |phi(beta*) - 1| over the finite cells (0 if none)."""
    from .rooney import phi2, phi_k

    worst = 0.0
    for alpha, delta, cell in grid.items():
        if isinstance(cell, float) and cell > 1.0:
            value = phi2(alpha, cell, delta) if grid.k == 2 else phi_k(alpha, cell, delta, grid.k)
            worst = max(worst, abs(value - 1.0))
    return worst if math.isfinite(worst) else math.inf
