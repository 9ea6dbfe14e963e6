import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erf

from nlramsey.grid import Field, Grid, TimeGrid, h1_norm, h1_seminorm, inner, integrate, l2_norm


def test_grid_geometry():
    g = Grid(2, 3.0, 20)
    assert g.h == pytest.approx(0.3)
    assert g.size == 400 and g.shape == (20, 20)
    assert g.axis[0] == pytest.approx(-3.0 + 0.15)
    assert np.allclose(g.axis, -g.axis[::-1])


@pytest.mark.parametrize("kw", [dict(dim=3, radius=1, points_per_axis=16), dict(dim=1, radius=0, points_per_axis=16),
                                dict(dim=1, radius=1, points_per_axis=8)])
def test_grid_rejects_bad_input(kw):
    with pytest.raises(ValueError):
        Grid(**kw)


def test_time_grid():
    tg = TimeGrid(1.0, 3)
    assert tg.steps * tg.dt == pytest.approx(1.0, abs=1e-15)
    assert tg.nodes[-1] == 1.0 and len(tg.nodes) == 4
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


def test_field_validation():
    g = Grid(1, 1.0, 16)
    with pytest.raises(ValueError):
        Field(g, np.ones(15))
    with pytest.raises(ValueError):
        Field(g, np.full(16, np.nan))
    f = Field(g, np.arange(16.0))
    with pytest.raises(ValueError):
        f.values[0] = 3.0


def test_integrate_constant_measure():
    g = Grid(1, 4.0, 64)
    assert integrate(g.constant(1.0)) == pytest.approx(8.0, rel=1e-14)


def test_integrate_odd_symmetry():
    g = Grid(1, 4.0, 64)
    f = g.field(g.coords[0])
    assert abs(integrate(f)) <= 1e-12 * l2_norm(f)


def test_integrate_normal_density_against_erf():
    g = Grid(1, 8.0, 1024)  # h = 1/64
    x = g.coords[0]
    f = g.field(np.exp(-x**2 / 2) / math.sqrt(2 * math.pi))
    exact = erf(8.0 / math.sqrt(2))
    assert integrate(f) == pytest.approx(exact, abs=1e-6)
    assert integrate(f) == pytest.approx(1.0, abs=1e-6)


def test_l2_examples():
    g = Grid(1, 1.0, 32)
    assert l2_norm(g.constant(0.0)) == 0.0
    assert l2_norm(g.constant(2.0)) == pytest.approx(math.sqrt(8.0), rel=1e-14)


def test_l2_matches_naive_sum(rng):
    g = Grid(2, 2.0, 24)
    v = rng.standard_normal(g.shape)
    naive = 0.0
    for i in range(24):
        for j in range(24):
            naive += v[i, j] ** 2 * g.h * g.h
    assert l2_norm(g.field(v)) == pytest.approx(math.sqrt(naive), rel=1e-12)


def test_h1_seminorm_constant_and_linear():
    g = Grid(1, 4.0, 128)
    assert h1_seminorm(g.constant(3.0)) == 0.0
    lin = g.field(g.coords[0])
    assert abs(h1_seminorm(lin) ** 2 - g.measure) / g.measure <= 2 * g.h / g.radius


def test_h1_seminorm_second_order():
    errs = []
    for n in (32, 64, 128, 256):
        g = Grid(1, 2.0, n)
        f = g.field(np.sin(math.pi * g.coords[0] / 2.0))
        # |d/dx sin(pi x / R)|^2 integrates to (pi/R)^2 R over [-R, R]
        exact = math.sqrt((math.pi / 2.0) ** 2 * 2.0)
        errs.append(abs(h1_seminorm(f) - exact))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_integrate_converges_at_second_order():
    errs = []
    for n in (16, 32, 64, 128):
        g = Grid(1, 1.0, n)
        errs.append(abs(integrate(g.field(np.cos(g.coords[0]))) - 2 * math.sin(1.0)))
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) >= 1.9)


def test_h1_norm_combines_parts(rng):
    g = Grid(2, 2.0, 16)
    f = g.field(rng.standard_normal(g.shape))
    assert h1_norm(f) ** 2 == pytest.approx(l2_norm(f) ** 2 + h1_seminorm(f) ** 2)


seeds = st.integers(0, 2**32 - 1)
scalars = st.floats(-10, 10, allow_nan=False)


@given(seeds, scalars, scalars)
def test_integrate_is_linear(seed, a, b):
    r = np.random.default_rng(seed)
    g = Grid(1, 3.0, 32)
    f, h = g.field(r.standard_normal(32)), g.field(r.standard_normal(32))
    lhs = integrate(f * a + h * b)
    rhs = a * integrate(f) + b * integrate(h)
    scale = abs(a) * integrate(abs_field(f)) + abs(b) * integrate(abs_field(h)) + 1e-300
    assert abs(lhs - rhs) <= 1e-12 * scale


def abs_field(f):
    return Field(f.grid, np.abs(f.values))


@given(seeds)
def test_l2_triangle_inequality(seed):
    r = np.random.default_rng(seed)
    g = Grid(2, 1.0, 16)
    f, h = g.field(r.standard_normal(g.shape)), g.field(10 * r.standard_normal(g.shape))
    assert l2_norm(f + h) <= l2_norm(f) + l2_norm(h) + 1e-12
    assert abs(inner(f, h)) <= l2_norm(f) * l2_norm(h) + 1e-12
