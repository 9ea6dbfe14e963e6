import math

import numpy as np
import pytest

import nlramsey.adjoint as adjoint_mod
from conftest import make_params, make_scenario
from nlramsey.adjoint import (
    LineSearchError,
    OptimizeConfig,
    adjoint_solve,
    evaluate,
    gradient_check,
    l2_inner,
    optimize,
    reduced_gradient,
)
from nlramsey.checks import interior_control
from nlramsey.config import build, load_shipped
from nlramsey.forward import solve_forward
from nlramsey.kernels import GaussianKernel
from nlramsey.objective import AdmissibleSet, ObjectiveSpec, discount_weights, utility_derivative

NO_PENALTY = dict(rho1=math.inf, rho2=math.inf)


def test_adjoint_zero_without_costs(scenario):
    spec = ObjectiveSpec(utility_weight=0.0, **NO_PENALTY)
    lam = adjoint_solve(scenario, spec, solve_forward(scenario))
    assert lam.shape == (scenario.time.steps + 1,) + scenario.grid.shape
    assert np.all(lam == 0.0)
    assert np.all(reduced_gradient(scenario, spec, np.full((40, 64), 0.1)) == 0.0)


def test_gradient_without_penalties_is_utility_only(scenario, rng):
    spec = ObjectiveSpec(utility_kappa=1.4, **NO_PENALTY)
    c = rng.uniform(0, 0.3, (40, 64))
    g = reduced_gradient(scenario, spec, c)
    assert np.array_equal(g, -utility_derivative(spec, c) * discount_weights(spec, scenario))


def _dense_step_transpose(sc):
    """Dense one-step matrix S = M^-1 (I + dt N) built from the kernel formula directly."""
    grid, p, dt = sc.grid, sc.params, sc.time.dt
    x = grid.axis
    ker = GaussianKernel(p.eps, 1)
    conv = grid.h * ker((x[:, None] - x[None, :]) ** 2)
    nonlocal_ = p.beta * (conv - np.diag(conv.sum(axis=1)))
    lap = np.diag(np.full(grid.size, -2.0)) + np.diag(np.ones(grid.size - 1), 1) + np.diag(np.ones(grid.size - 1), -1)
    lap[0, 0] = lap[-1, -1] = -1.0
    lap /= grid.h**2
    m = np.eye(grid.size) * (1 + dt * p.delta) - dt * p.alpha * lap
    return (np.linalg.solve(m, np.eye(grid.size) + dt * nonlocal_)).T


def test_adjoint_matches_dense_transpose():
    sc = make_scenario(points=32, steps=20, a0=0.0, params=make_params(beta=0.8))
    spec = ObjectiveSpec(rho1=0.3, rho2=math.inf, utility_weight=0.0)
    traj = solve_forward(sc, np.full((20, 32), 0.05))
    lam = adjoint_solve(sc, spec, traj)
    st = _dense_step_transpose(sc)
    ref = (traj.states[-1] - sc.kT_target.values) / 0.3
    assert np.max(np.abs(lam[-1] - ref)) <= 1e-12
    for n in range(19, -1, -1):
        ref = st @ ref
        assert np.max(np.abs(lam[n] - ref)) <= 1e-10


def test_gradient_check_default_scenario(scenario):
    rows = gradient_check(scenario, ObjectiveSpec(), np.full((40, 64), 0.15), directions=10, step=1e-5)
    assert max(r[2] for r in rows) <= 1e-5


def test_gradient_check_with_active_hinge():
    """Negative capital: the hinge penalty and the clamped production are both active."""
    sc = make_scenario(points=64, steps=40, k0=0.02)
    c = np.full((40, 64), 0.6)
    assert np.min(solve_forward(sc, c).states) < 0
    rows = gradient_check(sc, ObjectiveSpec(rho2=0.05), c, directions=10, step=1e-5, seed=4)
    assert max(r[2] for r in rows) <= 1e-5


def test_gradient_check_2d():
    sc = make_scenario(dim=2, radius=6.0, points=20, steps=20)
    rows = gradient_check(sc, ObjectiveSpec(), np.full((20, 20, 20), 0.15), directions=5)
    assert max(r[2] for r in rows) <= 1e-5


def test_optimize_config_validation():
    for kw in (dict(shrink=1.0), dict(sufficient_decrease=0.5), dict(max_outer=-1)):
        with pytest.raises(ValueError):
            OptimizeConfig(**kw)


@pytest.fixture(scope="module")
def default_setup():
    return build(load_shipped("default"))


@pytest.fixture(scope="module")
def default_result(default_setup):
    s = default_setup
    return optimize(s.scenario, s.objective, s.admissible, OptimizeConfig(max_outer=200))


def test_optimize_history_and_feasibility(default_setup, default_result):
    hist = np.array(default_result.objective_history)
    assert len(hist) >= 2 and np.all(np.diff(hist) <= 0)
    assert default_setup.admissible.violation(default_result.control, default_setup.scenario.time.dt) <= 1e-9
    assert default_result.status == "converged"


def test_optimize_warm_restart(default_setup, default_result):
    s = default_setup
    again = optimize(s.scenario, s.objective, s.admissible, OptimizeConfig(max_outer=200), initial=default_result.control)
    assert again.iterations <= 2
    assert abs(again.objective_history[-1] - default_result.objective_history[-1]) <= 1e-8


def test_optimize_zero_iterations(default_setup):
    s = default_setup
    res = optimize(s.scenario, s.objective, s.admissible, OptimizeConfig(max_outer=0))
    assert len(res.objective_history) == 1 and res.iterations == 0
    assert res.objective_history[0] == pytest.approx(evaluate(s.scenario, s.objective, res.control))


def test_optimize_without_utility_drives_consumption_to_zero():
    # without production a tiny k0 leaves no room for consumption before capital turns negative
    sc = make_scenario(points=48, steps=20, k0=1e-3, a0=0.0)
    spec = ObjectiveSpec(utility_weight=0.0, rho1=math.inf, rho2=0.01)
    aset = AdmissibleSet(sc.grid.constant(0.5), 2.0)
    res = optimize(sc, spec, aset, OptimizeConfig(max_outer=100))
    assert res.objective_history[-1] <= evaluate(sc, spec, None) + 1e-10
    assert np.max(res.control) <= 2e-3


def test_optimize_fd_check_recorded(scenario):
    aset = AdmissibleSet(scenario.grid.constant(0.3), 1.0)
    res = optimize(scenario, ObjectiveSpec(), aset, OptimizeConfig(max_outer=1, fd_check=True))
    assert len(res.gradient_check) == 10 and max(r[2] for r in res.gradient_check) <= 1e-5


def test_line_search_failure_reports_last_iterate(scenario, monkeypatch):
    aset = AdmissibleSet(scenario.grid.constant(0.3), 1.0)
    real = adjoint_mod.objective_parts
    calls = {"n": 0}

    class Worse:
        def __init__(self, total):
            self.total = total

    def rigged(spec, sc, c, states):
        calls["n"] += 1
        value = real(spec, sc, c, states).total
        return Worse(value if calls["n"] == 1 else value + 1e6)

    monkeypatch.setattr(adjoint_mod, "objective_parts", rigged)
    with pytest.raises(LineSearchError) as info:
        optimize(scenario, ObjectiveSpec(), aset, OptimizeConfig(max_outer=5, max_halvings=4))
    assert info.value.result.status == "line-search-failed"
    assert info.value.result.iterations == 0


def test_l2_inner_weights(scenario):
    ones = np.ones((40, 64))
    assert l2_inner(scenario, ones, ones) == pytest.approx(scenario.time.horizon * scenario.grid.measure)


def test_interior_control_is_feasible_box(default_setup):
    c = interior_control(default_setup)
    assert np.all(c > 0) and np.all(c < default_setup.admissible.c_max.values)
