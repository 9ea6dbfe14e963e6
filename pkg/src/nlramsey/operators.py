"""Mixed local/nonlocal diffusion, the productivity-production operator and the bilinear form."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .grid import Field, Grid, gradient_array, integrate_array
from .kernels import DEFAULT_TAIL_TOL, Convolver, GaussianKernel, NominalSpec, get_convolver


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the capital accumulation equation.

    ``beta = 0`` is allowed: together with ``mu = eps`` it gives the purely
    local model. ``alpha`` must stay strictly positive.
    """

    alpha: float
    beta: float
    delta: float
    eps: float
    mu: float
    xi: float
    nominal: NominalSpec = field(default_factory=lambda: NominalSpec(0.01))

    def __post_init__(self):
        errors = validate_model(self.alpha, self.beta, self.delta, self.eps, self.mu, self.xi)
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def fraction_bound_exponent(self) -> float:
        """``eps / mu``; raise to the grid dimension for the growth-fraction bound."""
        return self.eps / self.mu


def validate_model(alpha, beta, delta, eps, mu, xi) -> list[str]:
    errors = []
    if not alpha > 0:
        errors.append(f"alpha must be > 0 (local diffusion keeps the form coercive), got {alpha}")
    if not beta >= 0:
        errors.append(f"beta must be >= 0, got {beta}")
    if not delta > 0:
        errors.append(f"delta must be > 0, got {delta}")
    if not eps > 0:
        errors.append(f"eps must be > 0, got {eps}")
    if not mu > 0:
        errors.append(f"mu must be > 0, got {mu}")
    elif eps > 0 and mu > eps:
        errors.append(
            f"mu = {mu} exceeds eps = {eps}: the growth-fraction bound (eps/mu)^n needs 0 < mu <= eps"
        )
    if not xi > 0:
        errors.append(f"xi must be > 0 (keeps the growth fraction Lipschitz), got {xi}")
    return errors


@dataclass(frozen=True)
class ProductionSpec:
    """Saturating production p(k) = M (1 - exp(-(L/M) max(k, 0)))."""

    lipschitz: float
    bound: float

    def __post_init__(self):
        if not self.lipschitz > 0 or not self.bound > 0:
            raise ValueError("production lipschitz and bound must be positive")

    def value(self, k):
        k = np.maximum(np.asarray(k, dtype=float), 0.0)
        return -self.bound * np.expm1(-(self.lipschitz / self.bound) * k)

    def derivative(self, k):
        k = np.asarray(k, dtype=float)
        return np.where(k > 0, self.lipschitz * np.exp(-(self.lipschitz / self.bound) * np.maximum(k, 0.0)), 0.0)


@dataclass(frozen=True, eq=False)
class ProductivityState:
    a0: Field
    mu_conv: Convolver
    eps_conv: Convolver

    @classmethod
    def build(cls, a0: Field, params: ModelParams, tail_tol: float = DEFAULT_TAIL_TOL) -> "ProductivityState":
        return cls(
            a0,
            get_convolver(a0.grid, params.mu, tail_tol),
            get_convolver(a0.grid, params.eps, tail_tol),
        )

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.a0.values)))

    @property
    def l2(self) -> float:
        return float(np.sqrt(integrate_array(self.a0.grid, self.a0.values**2)))


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """3-point / 5-point Laplacian with reflecting ghost cells (homogeneous Neumann)."""
    n = grid.points_per_axis
    main = np.full(n, -2.0)
    main[[0, -1]] = -1.0
    off = np.ones(n - 1)
    lap1 = sp.diags([off, main, off], [-1, 0, 1]) / grid.h**2
    if grid.dim == 1:
        return lap1.tocsr()
    eye = sp.identity(n)
    return (sp.kron(lap1, eye) + sp.kron(eye, lap1)).tocsr()


class Operators:
    """Array-level right-hand-side operators for one grid and parameter set.

    Arrays carry the grid shape in their trailing axes. This is the hot path
    used by the time steppers and the adjoint; the Field functions below are
    thin wrappers around it.
    """

    def __init__(self, grid: Grid, params: ModelParams, production: ProductionSpec, a0: np.ndarray,
                 tail_tol: float = DEFAULT_TAIL_TOL):
        self.grid = grid
        self.params = params
        self.production = production
        self.a0 = np.asarray(a0, dtype=float).reshape(grid.shape)
        self.conv_eps = get_convolver(grid, params.eps, tail_tol)
        self.conv_mu = get_convolver(grid, params.mu, tail_tol)
        self.mass = self.conv_eps.mass()
        self.laplacian = laplacian_matrix(grid)
        self.production_on = bool(np.any(self.a0 != 0.0))

    def _lap(self, k):
        return (self.laplacian @ k.ravel()).reshape(self.grid.shape)

    def nonlocal_term(self, k):
        """``beta * (Gamma_eps * k - k * mass)``; exactly zero when beta is zero."""
        if self.params.beta == 0.0:
            return np.zeros(self.grid.shape)
        return self.params.beta * (self.conv_eps(k) - k * self.mass)

    def diffusion(self, k):
        return self.params.alpha * self._lap(k) + self.nonlocal_term(k)

    def fraction_parts(self, k):
        nominal = self.params.nominal
        phi = nominal.value(k)
        phi_mu = self.conv_mu(phi)
        phi_eps = phi_mu if self.conv_mu is self.conv_eps else self.conv_eps(phi)
        denom = phi_eps + self.params.xi
        return phi_mu / denom, denom

    def fraction(self, k):
        return self.fraction_parts(k)[0]

    def productivity(self, k, t):
        if not self.production_on:
            return np.zeros(self.grid.shape)
        frac, _ = self.fraction_parts(k)
        return self.a0 * np.exp(t * frac) * self.production.value(k)

    def productivity_vjp(self, k, t, y):
        """Transpose of the Jacobian of ``k -> productivity(k, t)`` applied to ``y``.

        Both convolution matrices are symmetric, so their transposes are the
        convolutions themselves.
        """
        if not self.production_on:
            return np.zeros(self.grid.shape)
        frac, denom = self.fraction_parts(k)
        growth = self.a0 * np.exp(t * frac)
        out = growth * self.production.derivative(k) * y
        s = y * growth * self.production.value(k) * t / denom
        back = self.conv_mu(s) - self.conv_eps(s * frac)
        return out + self.params.nominal.derivative(k) * back

    def productivity_jvp(self, k, t, d):
        if not self.production_on:
            return np.zeros(self.grid.shape)
        frac, denom = self.fraction_parts(k)
        growth = self.a0 * np.exp(t * frac)
        dphi = self.params.nominal.derivative(k) * d
        dfrac = (self.conv_mu(dphi) - frac * self.conv_eps(dphi)) / denom
        return growth * (self.production.derivative(k) * d + self.production.value(k) * t * dfrac)


def apply_diffusion(params: ModelParams, k: Field, tail_tol: float = DEFAULT_TAIL_TOL) -> Field:
    grid = k.grid
    lap = (laplacian_matrix(grid) @ k.flat).reshape(grid.shape)
    out = params.alpha * lap
    if params.beta != 0.0:
        conv = get_convolver(grid, params.eps, tail_tol)
        out = out + params.beta * (conv(k.values) - k.values * conv.mass())
    return Field(grid, out)


def apply_productivity(params: ModelParams, prod: ProductionSpec, state: ProductivityState, k: Field, t: float) -> Field:
    frac_num = state.mu_conv(params.nominal.value(k.values))
    frac = frac_num / (state.eps_conv(params.nominal.value(k.values)) + params.xi)
    return Field(k.grid, state.a0.values * np.exp(t * frac) * prod.value(k.values))


def productivity_bound_constant(params: ModelParams, prod: ProductionSpec, state: ProductivityState, t: float) -> float:
    """``||A0||_inf * exp(t (eps/mu)^n) * L_p``: the L2 growth bound of the production operator."""
    n = state.a0.grid.dim
    return state.sup * math.exp(t * params.fraction_bound_exponent**n) * prod.lipschitz


def kernel_energy(grid: Grid, bandwidth: float) -> float:
    """Upper bound on ``sup_x int Gamma(x, y)^2 dy``, valid for the continuum and the grid.

    Uses ``Gamma_nu^2 = (2 nu sqrt(pi))^-n Gamma_{nu/sqrt2}`` and bounds the
    gridded mass of the narrower kernel by its sum over every grid offset.
    """
    n = grid.dim
    scale = (2.0 * bandwidth * math.sqrt(math.pi)) ** (-n)
    offsets = (np.arange(2 * grid.points_per_axis - 1) - (grid.points_per_axis - 1)) * grid.h
    narrow = GaussianKernel(bandwidth / math.sqrt(2.0), 1)
    lattice_mass = (grid.h * float(np.sum(narrow(offsets**2)))) ** n
    return scale * max(1.0, lattice_mass)


def productivity_lipschitz_constant(params: ModelParams, prod: ProductionSpec, state: ProductivityState, t: float) -> float:
    """Explicit L2 Lipschitz constant of ``k -> P(k)(., t)``.

    Split ``P(k1) - P(k2)`` into a production difference (Lipschitz ``L_p``
    times the sup of the productivity factor) and a productivity difference
    (bounded by ``M_p``). The exponential is Lipschitz with constant
    ``exp(t B)`` on ``[0, t B]``, ``B = (eps/mu)^n``. The fraction difference
    is at most ``(2/xi) |dPhi_mu| + (B/xi) |dPhi_eps|``, and Cauchy-Schwarz
    gives ``||A0 dPhi_nu|| <= L_phi ||A0||_2 sqrt(E_nu) ||k1 - k2||`` with
    ``E_nu`` from :func:`kernel_energy`.
    """
    grid = state.a0.grid
    bound = params.fraction_bound_exponent**grid.dim
    growth = math.exp(t * bound)
    first = state.sup * growth * prod.lipschitz
    lphi = params.nominal.lipschitz
    spread = (2.0 / params.xi) * math.sqrt(kernel_energy(grid, params.mu)) + (
        bound / params.xi
    ) * math.sqrt(kernel_energy(grid, params.eps))
    second = prod.bound * t * growth * lphi * state.l2 * spread
    return first + second


def productivity_lipschitz_check(params, prod, state, k1: Field, k2: Field, t: float) -> tuple[float, float]:
    """``(||P(k1) - P(k2)||, ||k1 - k2||)`` in L2 at time ``t``."""
    d = apply_productivity(params, prod, state, k1, t).values - apply_productivity(params, prod, state, k2, t).values
    grid = k1.grid
    return (
        float(np.sqrt(integrate_array(grid, d**2))),
        float(np.sqrt(integrate_array(grid, (k1.values - k2.values) ** 2))),
    )


def bilinear_form(params: ModelParams, u: Field, v: Field, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    grid = u.grid
    gu, gv = gradient_array(grid, u.values), gradient_array(grid, v.values)
    local = params.alpha * sum(integrate_array(grid, a * b) for a, b in zip(gu, gv))
    local += params.delta * integrate_array(grid, u.values * v.values)
    if params.beta == 0.0:
        return local
    conv = get_convolver(grid, params.eps, tail_tol)
    nl = conv(u.values) - u.values * conv.mass()
    return local - params.beta * integrate_array(grid, nl * v.values)


def mean_jump_length(eps: float, dim: int) -> float:
    """``int |z| Gamma_eps(z) dz`` (the constant kappa in the continuity estimate)."""
    return eps * math.sqrt(2.0) * math.gamma((dim + 1) / 2) / math.gamma(dim / 2)


def garding_constants(params: ModelParams, dim: int) -> tuple[float, float]:
    """``(c2, c3)`` with ``a(u,u) + c2 ||u||^2 >= c3 ||u||_H1^2``, Young parameter ``c = alpha``."""
    kappa = mean_jump_length(params.eps, dim)
    c = params.alpha
    c2 = max(0.0, params.alpha + (params.beta * kappa) ** 2 / (2.0 * c) - params.delta)
    c3 = params.alpha - c / 2.0
    return c2, c3
