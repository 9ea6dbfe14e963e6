"""Invariant suite behind ``nlramsey check``; every random draw comes from one seed."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adjoint import gradient_check
from .config import Setup
from .grid import h1_norm, l2_norm
from .kernels import growth_fraction
from .operators import (
    apply_productivity,
    bilinear_form,
    garding_constants,
    productivity_bound_constant,
    productivity_lipschitz_check,
    productivity_lipschitz_constant,
)
from .sampling import random_field

GRADIENT_RTOL = 1e-5


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def check_fraction_bound(setup: Setup, rng, samples: int) -> CheckResult:
    sc = setup.scenario
    p = sc.params
    bound = p.fraction_bound_exponent**sc.grid.dim
    worst = max(
        float(np.max(growth_fraction(p.nominal, random_field(sc.grid, rng), p.mu, p.eps, p.xi, sc.tail_tol).values))
        for _ in range(samples)
    )
    return CheckResult("growth-fraction bound", worst <= bound, f"max {worst:.6g} <= (eps/mu)^n = {bound:.6g}")


def check_production_bounds(setup: Setup, rng, samples: int) -> list[CheckResult]:
    sc = setup.scenario
    p, prod, state = sc.params, sc.production, sc.productivity
    t = sc.time.horizon
    c1 = productivity_bound_constant(p, prod, state, t)
    c2 = productivity_lipschitz_constant(p, prod, state, t)
    worst_bound = worst_lip = 0.0
    for _ in range(samples):
        k1, k2 = random_field(sc.grid, rng), random_field(sc.grid, rng)
        norm_k = l2_norm(k1)
        if norm_k > 0:
            worst_bound = max(worst_bound, l2_norm(apply_productivity(p, prod, state, k1, t)) / norm_k)
        num, den = productivity_lipschitz_check(p, prod, state, k1, k2, t)
        if den > 0:
            worst_lip = max(worst_lip, num / den)
    return [
        CheckResult("production growth bound", worst_bound <= c1, f"max ratio {worst_bound:.6g} <= c1 = {c1:.6g}"),
        CheckResult("production Lipschitz bound", worst_lip <= c2, f"max ratio {worst_lip:.6g} <= c2 = {c2:.6g}"),
    ]


def check_garding(setup: Setup, rng, samples: int) -> CheckResult:
    sc = setup.scenario
    c2, c3 = garding_constants(sc.params, sc.grid.dim)
    worst = math.inf
    for _ in range(samples):
        u = random_field(sc.grid, rng)
        h1 = h1_norm(u) ** 2
        if h1 == 0:
            continue
        worst = min(worst, (bilinear_form(sc.params, u, u, sc.tail_tol) + c2 * l2_norm(u) ** 2) / h1)
    return CheckResult("Garding inequality", worst >= c3, f"min ratio {worst:.6g} >= c3 = {c3:.6g} (c2 = {c2:.6g})")


def interior_control(setup: Setup) -> np.ndarray:
    """Strictly feasible control away from the box faces, used for derivative checks."""
    sc = setup.scenario
    c_max = setup.admissible.c_max.values
    c = np.broadcast_to(0.5 * c_max + 1e-3 * (c_max > 0), (sc.time.steps,) + sc.grid.shape)
    return np.array(c)


def check_gradient(setup: Setup, seed: int, directions: int = 10) -> CheckResult:
    rows = gradient_check(setup.scenario, setup.objective, interior_control(setup), directions, seed=seed)
    worst = max(r[2] for r in rows)
    return CheckResult("adjoint gradient", worst <= GRADIENT_RTOL,
                       f"max relative error {worst:.3e} over {directions} directions (tol {GRADIENT_RTOL:.0e})")


def run_checks(setup: Setup, seed: int = 0, samples: int = 100) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = [check_fraction_bound(setup, rng, samples)]
    results += check_production_bounds(setup, rng, samples)
    results.append(check_garding(setup, rng, samples))
    results.append(check_gradient(setup, seed))
    return results
