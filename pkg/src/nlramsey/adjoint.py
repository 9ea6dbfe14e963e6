"""Discrete adjoint of the IMEX scheme, reduced gradient and projected gradient descent."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .forward import Scenario, SolverError, Trajectory, as_control, forward_states, solve_forward
from .objective import (
    AdmissibleSet,
    ObjectiveSpec,
    discount_weights,
    objective_parts,
    project_admissible,
    utility_derivative,
)


@dataclass(frozen=True)
class OptimizeConfig:
    max_outer: int = 200
    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    grad_tol: float = 1e-7
    max_halvings: int = 60
    fd_check: bool = False

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0 < self.sufficient_decrease < 0.5:
            raise ValueError("sufficient_decrease must lie in (0, 1/2)")
        if self.max_outer < 0:
            raise ValueError("max_outer must be >= 0")


@dataclass
class OptimizeResult:
    control: np.ndarray
    trajectory: Trajectory
    objective_history: list[float]
    kkt_residual: float
    iterations: int
    status: str = "converged"
    gradient_check: list[tuple[float, float, float]] = field(default_factory=list)


class LineSearchError(SolverError):
    def __init__(self, message, result: OptimizeResult):
        super().__init__(message)
        self.result = result


def l2_inner(scenario: Scenario, a: np.ndarray, b: np.ndarray) -> float:
    """``L2(0,T;L2)`` inner product of two control-shaped arrays."""
    return scenario.time.dt * scenario.grid.cell_volume * float(np.sum(a * b))


def _backward(scenario: Scenario, spec: ObjectiveSpec, states: np.ndarray):
    """Return ``(lam, w)`` with ``lam[n] = dJ/dk_n`` (L2 representative) and ``w[n] = M^-1 lam[n+1]``."""
    ops, tg = scenario.ops, scenario.time
    dt = tg.dt
    lam = np.empty_like(states)
    w = np.empty((tg.steps,) + scenario.grid.shape)
    hinge = spec.hinge_coef * dt
    lam[-1] = spec.terminal_coef * (states[-1] - scenario.kT_target.values) + hinge * np.minimum(states[-1], 0.0)
    for n in range(tg.steps - 1, -1, -1):
        wn = scenario.solve_implicit(lam[n + 1], n)
        k = states[n]
        lam[n] = wn + dt * (ops.nonlocal_term(wn) + ops.productivity_vjp(k, n * dt, wn))
        if n > 0:
            lam[n] += hinge * np.minimum(k, 0.0)
        if not np.all(np.isfinite(lam[n])):
            raise SolverError("non-finite adjoint", n)
        w[n] = wn
    return lam, w


def adjoint_solve(scenario: Scenario, spec: ObjectiveSpec, trajectory: Trajectory, control=None) -> np.ndarray:
    """Backward sweep of the transposed linearised IMEX steps; shape ``(steps + 1, *grid.shape)``.

    ``control`` is accepted for interface symmetry: the control enters the
    scheme additively, so the adjoint does not depend on it.
    """
    lam, _ = _backward(scenario, spec, trajectory.states)
    return lam


def _gradient_from(scenario, spec, c, states):
    _, w = _backward(scenario, spec, states)
    g = -w
    if spec.utility_weight:
        g = g - spec.utility_weight * utility_derivative(spec, c) * discount_weights(spec, scenario)
    return g


def reduced_gradient(scenario: Scenario, spec: ObjectiveSpec, control) -> np.ndarray:
    """L2 gradient of the reduced objective ``c -> J(c, k(c))``.

    ``g_n = -U'(c_n) w_n - M^-1 lam_{n+1}``: consumption enters the state
    equation with a minus sign and through the implicit solve.
    """
    c = as_control(scenario, control)
    return _gradient_from(scenario, spec, c, forward_states(scenario, c))


def evaluate(scenario: Scenario, spec: ObjectiveSpec, control) -> float:
    c = as_control(scenario, control)
    return objective_parts(spec, scenario, c, forward_states(scenario, c)).total


def gradient_check(scenario: Scenario, spec: ObjectiveSpec, control, directions: int = 10,
                   step: float = 1e-5, seed: int = 0) -> list[tuple[float, float, float]]:
    """Compare ``<g, d>`` with central differences along random unit directions.

    Returns ``(adjoint, finite_difference, relative_error)`` per direction.
    """
    c = as_control(scenario, control)
    g = reduced_gradient(scenario, spec, c)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(directions):
        d = rng.standard_normal(c.shape)
        d /= math.sqrt(l2_inner(scenario, d, d))
        adj = l2_inner(scenario, g, d)
        fd = (evaluate(scenario, spec, c + step * d) - evaluate(scenario, spec, c - step * d)) / (2 * step)
        out.append((adj, fd, abs(adj - fd) / abs(adj)))
    return out


def optimize(scenario: Scenario, spec: ObjectiveSpec, aset: AdmissibleSet, config: OptimizeConfig | None = None,
             initial=None) -> OptimizeResult:
    """Projected gradient descent with Armijo backtracking on the projection arc.

    A step ``c+ = P(c - s g)`` is accepted when
    ``J(c+) <= J(c) - (sigma / s) ||c+ - c||^2``. Stops when the projected
    gradient ``||c - P(c - g)||`` drops to ``grad_tol``.
    """
    config = config or OptimizeConfig()
    dt = scenario.time.dt

    def proj(x):
        return project_admissible(aset, x, dt)

    if initial is None:
        initial = 0.5 * np.broadcast_to(aset.c_max.values, (scenario.time.steps,) + scenario.grid.shape)
    c = proj(as_control(scenario, initial))
    states = forward_states(scenario, c)
    value = objective_parts(spec, scenario, c, states).total
    history = [value]
    checks = gradient_check(scenario, spec, c) if config.fd_check else []

    def kkt(c, g):
        r = c - proj(c - g)
        return math.sqrt(l2_inner(scenario, r, r))

    step = config.initial_step
    status = "max-outer"
    iterations = 0
    g = _gradient_from(scenario, spec, c, states)
    residual = kkt(c, g)
    for _ in range(config.max_outer):
        if residual <= config.grad_tol:
            status = "converged"
            break
        step = min(config.initial_step, step / config.shrink)
        for _ in range(config.max_halvings):
            trial = proj(c - step * g)
            moved = trial - c
            trial_states = forward_states(scenario, trial)
            trial_value = objective_parts(spec, scenario, trial, trial_states).total
            if trial_value <= value - config.sufficient_decrease / step * l2_inner(scenario, moved, moved):
                break
            step *= config.shrink
        else:
            result = OptimizeResult(c, solve_forward(scenario, c), history, residual, iterations,
                                    "line-search-failed", checks)
            raise LineSearchError(f"line search failed after {config.max_halvings} halvings", result)
        c, states, value = trial, trial_states, trial_value
        history.append(value)
        iterations += 1
        g = _gradient_from(scenario, spec, c, states)
        residual = kkt(c, g)
    else:
        if residual <= config.grad_tol:
            status = "converged"
    return OptimizeResult(c, solve_forward(scenario, c), history, residual, iterations, status, checks)
