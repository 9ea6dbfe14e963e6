"""CSV and manifest writers. Floats carry 17 significant digits; lines end in LF."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .forward import DIAGNOSTIC_COLUMNS, Trajectory
from .grid import Grid


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _coord_columns(grid: Grid) -> list[str]:
    return ["x"] if grid.dim == 1 else ["x", "y"]


def _point_coords(grid: Grid) -> np.ndarray:
    return np.stack([c.ravel() for c in grid.coords], axis=1)


def _write_rows(path, header, rows):
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _space_time_rows(grid, times, values):
    pts = [[_fmt(x) for x in p] for p in _point_coords(grid)]
    for t, field in zip(times, values):
        ts = _fmt(t)
        for p, v in zip(pts, np.asarray(field).ravel()):
            yield [ts, *p, _fmt(v)]


def write_trajectory(trajectory: Trajectory, path) -> None:
    if len(trajectory) == 0:
        raise ValueError("cannot write an empty trajectory")
    grid = trajectory.grid
    times = np.arange(len(trajectory)) * trajectory.time.dt
    _write_rows(path, ["t", *_coord_columns(grid), "k"], _space_time_rows(grid, times, trajectory.states))


def read_trajectory(path, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(times, states)`` with states shaped ``(n_times, *grid.shape)``."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    data = np.array([[float(x) for x in r] for r in rows])
    times = data[:: grid.size, 0]
    return times, data[:, -1].reshape((len(times),) + grid.shape)


def write_diagnostics(trajectory: Trajectory, path) -> None:
    times = np.arange(len(trajectory)) * trajectory.time.dt
    cols = [trajectory.diagnostics[c] for c in DIAGNOSTIC_COLUMNS]
    rows = ([_fmt(t), *(_fmt(c[i]) for c in cols)] for i, t in enumerate(times))
    _write_rows(path, ["t", *DIAGNOSTIC_COLUMNS], rows)


def write_control(grid: Grid, dt: float, control: np.ndarray, path) -> None:
    times = np.arange(len(control)) * dt
    _write_rows(path, ["t", *_coord_columns(grid), "c"], _space_time_rows(grid, times, control))


def write_history(history, path) -> None:
    _write_rows(path, ["iteration", "objective"], ([str(i), _fmt(v)] for i, v in enumerate(history)))


def write_table(path, header, columns) -> None:
    rows = ([_fmt(c[i]) for c in columns] for i in range(len(columns[0])))
    _write_rows(path, header, rows)


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
