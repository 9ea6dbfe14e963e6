"""Uniform cell-centred grids on a truncated box, sampled fields and discrete norms.

All quadrature in the package goes through :func:`integrate` (midpoint rule),
so norms, convolutions and the objective share one consistent inner product.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Box ``[-radius, radius]^dim`` split into ``points_per_axis`` cells per axis."""

    dim: int
    radius: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.points_per_axis < 16:
            raise ValueError(f"points_per_axis must be >= 16, got {self.points_per_axis}")

    @property
    def h(self) -> float:
        return 2.0 * self.radius / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def measure(self) -> float:
        return (2.0 * self.radius) ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        """Cell centres ``-R + (i + 1/2) h`` along one axis."""
        i = np.arange(self.points_per_axis)
        return -self.radius + (i + 0.5) * self.h

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays, each of shape :attr:`shape` (``ij`` indexing)."""
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def radius_squared(self) -> np.ndarray:
        return sum(c**2 for c in self.coords)

    def field(self, values) -> "Field":
        return Field(self, values)

    def constant(self, value: float) -> "Field":
        return Field(self, np.full(self.shape, float(value)))


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        # i * dt reproduces the horizon at i = steps to within one ulp
        return np.arange(self.steps + 1) * self.dt


@dataclass(frozen=True, eq=False)
class Field:
    """Real values sampled at the cell centres of ``grid``.

    ``values`` may be passed flat (length ``grid.size``) or shaped; it is
    stored shaped, copied and read-only.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.size != self.grid.size:
            raise ValueError(f"field has {v.size} values, grid has {self.grid.size} points")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def __add__(self, other):
        return Field(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return Field(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        return Field(self.grid, self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)


def _vals(x):
    return x.values if isinstance(x, Field) else x


def integrate_array(grid: Grid, values: np.ndarray) -> float:
    return float(grid.cell_volume * np.sum(values))


def gradient_array(grid: Grid, values: np.ndarray) -> list[np.ndarray]:
    """Central differences in the interior, one-sided at the truncation boundary."""
    values = np.asarray(values, dtype=float).reshape(grid.shape)
    if grid.dim == 1:
        return [np.gradient(values, grid.h)]
    return list(np.gradient(values, grid.h))


def integrate(f: Field) -> float:
    """Midpoint quadrature ``h^n * sum_i f(x_i)`` over the box."""
    return integrate_array(f.grid, f.values)


def inner(f: Field, g: Field) -> float:
    return integrate_array(f.grid, f.values * g.values)


def l2_norm(f: Field) -> float:
    return float(np.sqrt(integrate_array(f.grid, f.values**2)))


def h1_seminorm(f: Field) -> float:
    grads = gradient_array(f.grid, f.values)
    return float(np.sqrt(sum(integrate_array(f.grid, g**2) for g in grads)))


def h1_norm(f: Field) -> float:
    return float(np.hypot(l2_norm(f), h1_seminorm(f)))
