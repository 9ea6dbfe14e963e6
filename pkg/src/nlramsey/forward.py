"""Time integration of the capital accumulation equation.

Two solvers share one discretization: an IMEX Euler scheme (implicit local
diffusion and depreciation, explicit nonlocal diffusion, production and
consumption) and a Picard fixed-point construction that freezes the
production term at the previous iterate on short subintervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .grid import Field, Grid, TimeGrid, gradient_array, integrate_array
from .kernels import DEFAULT_TAIL_TOL
from .operators import ModelParams, Operators, ProductionSpec, ProductivityState, productivity_bound_constant


class SolverError(RuntimeError):
    """Forward or adjoint sweep failure; ``step`` is the offending time index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class PicardError(SolverError):
    pass


@dataclass(frozen=True, eq=False)
class Scenario:
    grid: Grid
    time: TimeGrid
    params: ModelParams
    production: ProductionSpec
    productivity: ProductivityState
    k0: Field
    kT_target: Field
    tail_tol: float = DEFAULT_TAIL_TOL
    require_positive_k0: bool = True

    def __post_init__(self):
        for name in ("k0", "kT_target"):
            if getattr(self, name).grid != self.grid:
                raise ValueError(f"{name} lives on a different grid")
        if self.productivity.a0.grid != self.grid:
            raise ValueError("productivity A0 lives on a different grid")
        if self.require_positive_k0 and not np.all(self.k0.values > 0):
            raise ValueError("initial capital k0 must be strictly positive")

    @classmethod
    def build(cls, grid, time, params, production, a0, k0, kT_target, tail_tol=DEFAULT_TAIL_TOL, **kw):
        a0 = a0 if isinstance(a0, Field) else Field(grid, a0)
        k0 = k0 if isinstance(k0, Field) else Field(grid, k0)
        kT = kT_target if isinstance(kT_target, Field) else Field(grid, kT_target)
        return cls(grid, time, params, production, ProductivityState.build(a0, params, tail_tol), k0, kT,
                   tail_tol, **kw)

    def replace(self, **changes) -> "Scenario":
        """Copy with changed parameters; fields and kernels are rebuilt as needed."""
        kw = dict(grid=self.grid, time=self.time, params=self.params, production=self.production,
                  a0=self.productivity.a0, k0=self.k0, kT_target=self.kT_target, tail_tol=self.tail_tol,
                  require_positive_k0=self.require_positive_k0)
        kw.update(changes)
        return Scenario.build(**kw)

    @cached_property
    def ops(self) -> Operators:
        return Operators(self.grid, self.params, self.production, self.productivity.a0.values, self.tail_tol)

    @cached_property
    def implicit_matrix(self) -> sp.csr_matrix:
        dt, p = self.time.dt, self.params
        eye = sp.identity(self.grid.size, format="csr")
        return (eye * (1.0 + dt * p.delta) - dt * p.alpha * self.ops.laplacian).tocsr()

    @cached_property
    def _cholesky(self):
        m = self.implicit_matrix
        u = 1 if self.grid.dim == 1 else self.grid.points_per_axis
        ab = np.zeros((u + 1, self.grid.size))
        for d in range(u + 1):
            diag = m.diagonal(d)
            ab[u - d, d:] = diag
        return scipy.linalg.cholesky_banded(ab, lower=False)

    def solve_implicit(self, rhs: np.ndarray, step: int | None = None) -> np.ndarray:
        """Solve the SPD banded system to residual <= 1e-12 ||rhs||."""
        b = rhs.ravel()
        x = scipy.linalg.cho_solve_banded((self._cholesky, False), b, check_finite=False)
        bnorm = np.linalg.norm(b)
        res = b - self.implicit_matrix @ x
        if np.linalg.norm(res) > 1e-12 * bnorm:
            x = x + scipy.linalg.cho_solve_banded((self._cholesky, False), res, check_finite=False)
            res = b - self.implicit_matrix @ x
            if np.linalg.norm(res) > 1e-12 * bnorm:
                raise SolverError("implicit solve did not reach residual 1e-12", step)
        return x.reshape(self.grid.shape)

    def stable_dt(self) -> float:
        """Largest dt keeping the explicit part monotone: ``dt (beta max(mass) + c1(T)) <= 1``."""
        rate = self.params.beta * float(np.max(self.ops.mass))
        if self.ops.production_on:
            rate += productivity_bound_constant(self.params, self.production, self.productivity, self.time.horizon)
        return math.inf if rate == 0 else 1.0 / rate


@dataclass
class Trajectory:
    grid: Grid
    time: TimeGrid
    states: np.ndarray
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    def __getitem__(self, n: int) -> Field:
        return Field(self.grid, self.states[n])

    @property
    def terminal(self) -> Field:
        return self[-1]


DIAGNOSTIC_COLUMNS = ("l2", "h1", "min_k", "max_fraction", "nonlocal_l2")


def state_diagnostics(ops: Operators, k: np.ndarray) -> tuple[float, ...]:
    grid = ops.grid
    l2 = math.sqrt(integrate_array(grid, k**2))
    h1 = math.sqrt(sum(integrate_array(grid, g**2) for g in gradient_array(grid, k)))
    nl = ops.nonlocal_term(k)
    return (l2, h1, float(np.min(k)), float(np.max(ops.fraction(k))), math.sqrt(integrate_array(grid, nl**2)))


def as_control(scenario: Scenario, control) -> np.ndarray:
    """Normalise a control to shape ``(steps, *grid.shape)``; ``None`` means zero."""
    shape = (scenario.time.steps,) + scenario.grid.shape
    if control is None:
        return np.zeros(shape)
    if not isinstance(control, np.ndarray):
        control = np.stack([c.values if isinstance(c, Field) else np.asarray(c, float) for c in control])
    control = np.asarray(control, dtype=float)
    if control.size != math.prod(shape):
        raise ValueError(f"control must have {scenario.time.steps} time slabs on the scenario grid")
    return control.reshape(shape)


def _explicit_rhs(scenario: Scenario, k, c, t, frozen=None):
    ops = scenario.ops
    prod_state = k if frozen is None else frozen
    return k + scenario.time.dt * (ops.nonlocal_term(k) + ops.productivity(prod_state, t) - c)


def _advance(scenario: Scenario, k, c, t, step, frozen=None):
    rhs = _explicit_rhs(scenario, k, c, t, frozen)
    if not np.all(np.isfinite(rhs)):
        raise SolverError("non-finite explicit terms", step)
    k_next = scenario.solve_implicit(rhs, step)
    if not np.all(np.isfinite(k_next)):
        raise SolverError("non-finite capital", step)
    return k_next


def step_imex(scenario: Scenario, k: Field, c: Field, t: float) -> Field:
    """One step ``(I - dt alpha Lap + dt delta) k+ = k + dt (NL(k) + P(k)(t) - c)``."""
    c_vals = c.values if isinstance(c, Field) else np.broadcast_to(np.asarray(c, float), scenario.grid.shape)
    return Field(scenario.grid, _advance(scenario, k.values, c_vals, t, None))


def _check_dt(scenario: Scenario):
    bound = scenario.stable_dt()
    if scenario.time.dt > bound:
        raise ValueError(f"dt = {scenario.time.dt:.4g} exceeds the explicit stability bound {bound:.4g}")


def _with_diagnostics(scenario: Scenario, states: np.ndarray) -> Trajectory:
    diag = np.array([state_diagnostics(scenario.ops, k) for k in states])
    return Trajectory(scenario.grid, scenario.time, states, dict(zip(DIAGNOSTIC_COLUMNS, diag.T)))


def forward_states(scenario: Scenario, control) -> np.ndarray:
    """IMEX sweep without diagnostics; shape ``(steps + 1, *grid.shape)``."""
    _check_dt(scenario)
    c = as_control(scenario, control)
    tg = scenario.time
    states = np.empty((tg.steps + 1,) + scenario.grid.shape)
    states[0] = scenario.k0.values
    for n in range(tg.steps):
        states[n + 1] = _advance(scenario, states[n], c[n], n * tg.dt, n)
    return states


def solve_forward(scenario: Scenario, control=None) -> Trajectory:
    return _with_diagnostics(scenario, forward_states(scenario, control))


@dataclass
class PicardReport:
    subinterval: float
    steps_per_subinterval: int
    iterations: list[int]
    factors: list[list[float]]
    increments: list[list[float]]

    @property
    def max_factor(self) -> float:
        flat = [f for fs in self.factors for f in fs]
        return max(flat) if flat else 0.0


def _max_l2(grid, a, b) -> float:
    d = (a - b).reshape(len(a), -1)
    return float(np.sqrt(grid.cell_volume * np.max(np.sum(d**2, axis=1))))


def solve_picard(scenario: Scenario, control=None, subinterval: float | None = None, tol: float = 1e-10,
                 max_iter: int = 60) -> tuple[Trajectory, PicardReport]:
    """Fixed-point construction on consecutive subintervals of length ``subinterval``.

    On each subinterval the map ``v -> u`` solves the linear equation with the
    production term frozen at ``v``; it is iterated until consecutive iterates
    differ by at most ``tol`` in the max-over-time L2 norm. The terminal state
    seeds the next subinterval.
    """
    _check_dt(scenario)
    tg = scenario.time
    sub = tg.horizon / 8 if subinterval is None else subinterval
    if not 0 < sub <= tg.horizon:
        raise ValueError(f"subinterval must lie in (0, T], got {sub}")
    m = round(sub / tg.dt)
    if m < 1 or not math.isclose(m * tg.dt, sub, rel_tol=1e-9) or tg.steps % m:
        raise ValueError(f"subinterval {sub} must be a whole number of steps dividing the {tg.steps} steps")
    c = as_control(scenario, control)
    grid = scenario.grid
    states = np.empty((tg.steps + 1,) + grid.shape)
    states[0] = scenario.k0.values
    report = PicardReport(sub, m, [], [], [])
    for start in range(0, tg.steps, m):
        v = np.repeat(states[start][None], m + 1, axis=0)
        incs, factors = [], []
        for it in range(1, max_iter + 1):
            u = np.empty_like(v)
            u[0] = states[start]
            for j in range(m):
                n = start + j
                u[j + 1] = _advance(scenario, u[j], c[n], n * tg.dt, n, frozen=v[j])
            inc = _max_l2(grid, u, v)
            if incs and incs[-1] > 0:
                factors.append(inc / incs[-1])
            incs.append(inc)
            v = u
            # a production-free map ignores its argument, so one sweep is its fixed point
            if inc <= tol or not scenario.ops.production_on:
                break
        else:
            last = factors[-1] if factors else float("nan")
            raise PicardError(f"Picard iteration did not converge in {max_iter} iterations "
                              f"(last contraction factor {last:.3g})", start)
        states[start : start + m + 1] = v
        report.iterations.append(it)
        report.factors.append(factors)
        report.increments.append(incs)
    return _with_diagnostics(scenario, states), report


@dataclass(frozen=True)
class AprioriReport:
    l2_h1: float
    linf_l2: float
    rhs: float

    @property
    def ratio(self) -> float:
        return (self.l2_h1 + self.linf_l2) / self.rhs


def apriori_report(trajectory: Trajectory, control, k0: Field) -> AprioriReport:
    """Norms in the a priori estimate: ``(||k||_{L2(H1)}, ||k||_{Linf(L2)}, ||c|| + ||k0|| + 1)``.

    Time integrals use the left-endpoint rule over the control slabs.
    """
    grid, dt = trajectory.grid, trajectory.time.dt
    states = trajectory.states
    sq_l2 = np.array([integrate_array(grid, k**2) for k in states])
    sq_h1 = np.array([sum(integrate_array(grid, g**2) for g in gradient_array(grid, k)) for k in states])
    l2_h1 = math.sqrt(dt * float(np.sum(sq_l2[:-1] + sq_h1[:-1])))
    linf_l2 = math.sqrt(float(np.max(sq_l2)))
    c = np.zeros((len(states) - 1,) + grid.shape) if control is None else np.asarray(control, float)
    c_norm = math.sqrt(dt * integrate_array(grid, c**2))
    k0_norm = math.sqrt(integrate_array(grid, k0.values**2))
    return AprioriReport(l2_h1, linf_l2, c_norm + k0_norm + 1.0)


def check_boundedness_condition(scenario: Scenario, admissible, theta: float) -> bool:
    """Sufficient condition for a bounded continuous solution (one space dimension).

    (i) ``4 L_p^2 <= theta`` and (ii) ``sup_x |k0| + T c_max(x)^2 < 1 / (16 L_p T e^{theta T / 2})``,
    where ``T c_max^2`` bounds the time integral of ``c^2`` for every admissible control.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    lp, horizon = scenario.production.lipschitz, scenario.time.horizon
    lhs = 4.0 * lp**2
    cond_i = lhs <= theta or math.isclose(lhs, theta, rel_tol=1e-12)
    c_max = np.asarray(admissible.c_max.values, dtype=float)
    sup = float(np.max(np.abs(scenario.k0.values) + horizon * c_max**2))
    cond_ii = sup < 1.0 / (16.0 * lp * horizon * math.exp(theta * horizon / 2.0))
    return bool(cond_i and cond_ii)


def sup_norm_bound(scenario: Scenario, c_sup: float) -> float:
    """Discrete maximum-principle bound on ``max |k|`` over the horizon.

    Valid when ``dt beta max(mass) <= 1``: the implicit matrix is an M-matrix,
    the explicit nonlocal update is a convex combination and the production
    term grows at most like ``||A0||_inf e^{t (eps/mu)^n} L_p |k|``.
    """
    p, tg = scenario.params, scenario.time
    if tg.dt * p.beta * float(np.max(scenario.ops.mass)) > 1.0:
        return math.inf
    n = scenario.grid.dim
    b = p.fraction_bound_exponent**n
    growth = productivity_bound_constant(p, scenario.production, scenario.productivity, 0.0)
    log_factor = growth * tg.horizon * math.exp(tg.horizon * b)
    k0_sup = float(np.max(np.abs(scenario.k0.values)))
    return (k0_sup + tg.horizon * c_sup) * math.exp(log_factor)
