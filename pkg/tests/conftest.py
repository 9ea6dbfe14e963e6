"""Shared scenario builders for the test suite."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from nlramsey.forward import Scenario
from nlramsey.grid import Grid, TimeGrid
from nlramsey.kernels import NominalSpec
from nlramsey.operators import ModelParams, ProductionSpec

settings.register_profile("ci", max_examples=40, deadline=None, derandomize=True)
settings.load_profile("ci")


def make_params(alpha=0.05, beta=0.5, delta=0.05, eps=0.5, mu=0.25, xi=0.5, eta=0.01):
    return ModelParams(alpha, beta, delta, eps, mu, xi, NominalSpec(eta))


def bump(grid, center=0.0, width=1.0, height=1.0):
    sq = sum((c - center) ** 2 for c in grid.coords)
    return height * np.exp(-sq / (2 * width**2))


def make_scenario(dim=1, radius=8.0, points=64, horizon=1.0, steps=40, params=None, production=None,
                  a0=None, k0=None, kT=None, **kw):
    grid = Grid(dim, radius, points)
    params = params or make_params()
    production = production or ProductionSpec(0.3, 1.0)
    a0 = bump(grid, 0.0, 2.0) if a0 is None else a0
    k0 = 0.2 + bump(grid, 0.0, 1.5) if k0 is None else k0
    kT = np.full(grid.shape, 0.3) if kT is None else kT
    a0, k0, kT = (np.broadcast_to(np.asarray(v, float), grid.shape) for v in (a0, k0, kT))
    return Scenario.build(grid, TimeGrid(horizon, steps), params, production, a0, k0, kT, **kw)


@pytest.fixture
def scenario():
    return make_scenario()


@pytest.fixture
def rng():
    return np.random.default_rng(0)
