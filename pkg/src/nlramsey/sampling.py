"""Seeded random fields for property checks."""
from __future__ import annotations

import numpy as np

from .grid import Field, Grid


def random_field(grid: Grid, rng: np.random.Generator, kind: str | None = None) -> Field:
    """Draw one field of a random ``kind``: bumps, noise, step, spikes or mixed.

    Amplitudes span several orders of magnitude and signs are mixed so that
    bounds are probed away from the smooth, positive regime.
    """
    kinds = ("bumps", "noise", "step", "spikes", "mixed")
    kind = kind or kinds[rng.integers(len(kinds))]
    scale = 10.0 ** rng.uniform(-2, 1.5)
    out = np.zeros(grid.shape)
    if kind in ("bumps", "mixed"):
        for _ in range(rng.integers(1, 5)):
            center = rng.uniform(-grid.radius / 2, grid.radius / 2, grid.dim)
            width = rng.uniform(0.2, grid.radius / 3)
            sq = sum((c - x0) ** 2 for c, x0 in zip(grid.coords, center))
            out += rng.uniform(-0.5, 1.0) * scale * np.exp(-sq / (2 * width**2))
    if kind in ("noise", "mixed"):
        out += scale * rng.standard_normal(grid.shape) * (0.3 if kind == "mixed" else 1.0)
    if kind == "step":
        edge = rng.uniform(-grid.radius / 2, grid.radius / 2)
        lo, hi = scale * rng.uniform(-1, 2, 2)
        out = np.where(grid.coords[0] < edge, lo, hi)
    if kind == "spikes":
        idx = rng.integers(0, grid.size, rng.integers(1, 6))
        out.ravel()[idx] = scale * rng.uniform(-1, 3, len(idx)) / grid.cell_volume
    return Field(grid, out)


def random_fields(grid: Grid, count: int, seed: int = 0) -> list[Field]:
    rng = np.random.default_rng(seed)
    return [random_field(grid, rng) for _ in range(count)]
