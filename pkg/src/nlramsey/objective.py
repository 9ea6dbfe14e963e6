"""Utility, discount weights, the penalised welfare objective and the admissible set."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .forward import Scenario, Trajectory, as_control
from .grid import Field


@dataclass(frozen=True)
class ObjectiveSpec:
    """Discount rates, penalty weights and the saturating utility ``U(c) = 1 - exp(-kappa c)``.

    ``rho1`` or ``rho2`` may be ``inf`` to switch the corresponding penalty
    off; ``utility_weight = 0`` switches the running utility off.
    """

    tau: float = 0.05
    gamma: float = 0.1
    rho1: float = 0.1
    rho2: float = 0.01
    utility_kappa: float = 1.0
    utility_weight: float = 1.0

    def __post_init__(self):
        if not self.tau >= 0:
            raise ValueError("tau must be >= 0")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not (self.rho1 > 0 and self.rho2 > 0):
            raise ValueError("rho1 and rho2 must be > 0")
        if not self.utility_kappa > 0:
            raise ValueError("utility_kappa must be > 0")
        if not self.utility_weight >= 0:
            raise ValueError("utility_weight must be >= 0")

    @property
    def terminal_coef(self) -> float:
        return 0.0 if math.isinf(self.rho1) else 1.0 / self.rho1

    @property
    def hinge_coef(self) -> float:
        return 0.0 if math.isinf(self.rho2) else 1.0 / self.rho2


def utility_value(spec: ObjectiveSpec, c):
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("utility is defined for non-negative consumption only")
    out = -np.expm1(-spec.utility_kappa * c)
    return float(out) if out.ndim == 0 else out


def utility_derivative(spec: ObjectiveSpec, c):
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("utility is defined for non-negative consumption only")
    out = spec.utility_kappa * np.exp(-spec.utility_kappa * c)
    return float(out) if out.ndim == 0 else out


def discount_weights(spec: ObjectiveSpec, scenario: Scenario) -> np.ndarray:
    """``exp(-tau t_n - gamma |x|^2)`` at the left endpoint of every control slab."""
    t = scenario.time.nodes[:-1]
    space = np.exp(-spec.gamma * scenario.grid.radius_squared)
    return np.exp(-spec.tau * t).reshape((-1,) + (1,) * scenario.grid.dim) * space


@dataclass(frozen=True)
class ObjectiveParts:
    utility: float
    terminal: float
    hinge: float

    @property
    def total(self) -> float:
        return self.utility + self.terminal + self.hinge


def objective_parts(spec: ObjectiveSpec, scenario: Scenario, control, states: np.ndarray) -> ObjectiveParts:
    grid, dt = scenario.grid, scenario.time.dt
    c = as_control(scenario, control)
    if states.shape != (scenario.time.steps + 1,) + grid.shape:
        raise ValueError("trajectory does not match the scenario grid and time steps")
    hv = grid.cell_volume
    running = 0.0
    if spec.utility_weight:
        running = -spec.utility_weight * dt * hv * float(np.sum(utility_value(spec, c) * discount_weights(spec, scenario)))
    resid = states[-1] - scenario.kT_target.values
    terminal = 0.5 * spec.terminal_coef * hv * float(np.sum(resid**2))
    # nodes 1..N: every control slab drives a penalised state (k_0 is data)
    neg = np.minimum(states[1:], 0.0)
    hinge = 0.5 * spec.hinge_coef * dt * hv * float(np.sum(neg**2))
    return ObjectiveParts(running, terminal, hinge)


def objective(spec: ObjectiveSpec, scenario: Scenario, control, trajectory: Trajectory | np.ndarray) -> float:
    """Discounted disutility of consumption plus terminal and non-negativity penalties.

    The running cost uses the left-endpoint rule on the control slabs, the
    non-negativity penalty sums the states ``k_1 .. k_N`` each slab produces,
    and space integrals use the midpoint rule of the grid.
    """
    states = trajectory.states if isinstance(trajectory, Trajectory) else np.asarray(trajectory)
    if isinstance(trajectory, Trajectory) and trajectory.grid != scenario.grid:
        raise ValueError("trajectory grid does not match the scenario grid")
    return objective_parts(spec, scenario, control, states).total


@dataclass(frozen=True, eq=False)
class AdmissibleSet:
    """``{c : 0 <= c(x, t) <= c_max(x), ||c||_{L2(0,T;L2)} <= norm_cap}``."""

    c_max: Field
    norm_cap: float

    def __post_init__(self):
        if np.any(self.c_max.values < 0):
            raise ValueError("c_max must be non-negative")
        if not self.norm_cap > 0:
            raise ValueError("norm_cap must be positive")

    def norm(self, control: np.ndarray, dt: float) -> float:
        return math.sqrt(dt * self.c_max.grid.cell_volume * float(np.sum(np.asarray(control) ** 2)))

    def violation(self, control: np.ndarray, dt: float) -> float:
        """Largest breach of the box or the norm cap (0 for a feasible control)."""
        c = np.asarray(control)
        box = max(0.0, float(np.max(-c)), float(np.max(c - self.c_max.values)))
        return max(0.0, box, self.norm(c, dt) - self.norm_cap)


def project_admissible(aset: AdmissibleSet, control, dt: float, tol: float = 1e-10, max_rounds: int = 100) -> np.ndarray:
    """Dykstra alternating projection onto box and norm ball.

    The L2(0,T;L2) weights are uniform, so the weighted projection is the
    Euclidean one. A final clip keeps the box exact; it cannot leave the ball
    because zero lies in the box.
    """
    x = np.array(control, dtype=float)
    c_max = aset.c_max.values
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_rounds):
        y = np.clip(x + p, 0.0, c_max)
        p = x + p - y
        z = y + q
        nz = aset.norm(z, dt)
        x_new = z if nz <= aset.norm_cap else z * (aset.norm_cap / nz)
        q = z - x_new
        moved = aset.norm(x_new - x, dt)
        x = x_new
        if moved <= tol:
            break
    else:
        warnings.warn(f"Dykstra projection hit the {max_rounds}-round cap", RuntimeWarning, stacklevel=2)
    return np.clip(x, 0.0, c_max)
