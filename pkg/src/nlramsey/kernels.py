"""Gaussian kernels, the convolution engine and the bounded growth fraction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
from scipy.special import erf

from .grid import Field, Grid

DEFAULT_TAIL_TOL = 1e-8


class KernelTailError(ValueError):
    """The kernel spills more than the allowed mass outside the truncated box."""


@dataclass(frozen=True)
class GaussianKernel:
    """Isotropic normal density with standard deviation ``bandwidth`` in ``dim`` dimensions."""

    bandwidth: float
    dim: int

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")

    def __call__(self, sq_dist):
        nu2 = self.bandwidth**2
        return (2.0 * math.pi * nu2) ** (-self.dim / 2) * np.exp(-np.asarray(sq_dist) / (2.0 * nu2))


@dataclass(frozen=True)
class NominalSpec:
    """phi(k) = sqrt(k^2 + eta): a smooth positive stand-in for |k|, 1-Lipschitz."""

    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")

    lipschitz = 1.0

    def value(self, k):
        return np.sqrt(np.asarray(k) ** 2 + self.eta)

    def derivative(self, k):
        k = np.asarray(k)
        return k / np.sqrt(k**2 + self.eta)


def kernel_value(kernel: GaussianKernel, displacement) -> float:
    d = np.atleast_1d(np.asarray(displacement, dtype=float))
    if d.shape != (kernel.dim,):
        raise ValueError(f"displacement must have {kernel.dim} components")
    if not np.all(np.isfinite(d)):
        raise ValueError("displacement must be finite")
    return float(kernel(np.dot(d, d)))


def tail_mass(bandwidth: float, dim: int, half_width: float) -> float:
    """Mass of the centred Gaussian outside the cube ``[-half_width, half_width]^dim``."""
    inside = erf(half_width / (math.sqrt(2.0) * bandwidth)) ** dim
    return float(1.0 - inside)


def interior_mask(grid: Grid) -> np.ndarray:
    """Points in the central half of the box, where the tail-mass guarantee applies."""
    return np.all([np.abs(c) <= grid.radius / 2 for c in grid.coords], axis=0)


class Convolver:
    """Quadrature convolution ``g_i = h^n sum_j f_j Gamma(x_i - x_j)`` on one grid.

    Uses a zero-padded real FFT; the padded length is at least ``2N - 1`` per
    axis so the circular product never wraps around. The kernel spectrum is
    computed once.
    """

    def __init__(self, grid: Grid, bandwidth: float, tail_tol: float = DEFAULT_TAIL_TOL):
        self.grid = grid
        self.kernel = GaussianKernel(bandwidth, grid.dim)
        self.tail = tail_mass(bandwidth, grid.dim, grid.radius / 2)
        if self.tail > tail_tol:
            raise KernelTailError(
                f"kernel bandwidth {bandwidth} leaves tail mass {self.tail:.3e} outside "
                f"the central half of a box of radius {grid.radius} (tolerance {tail_tol:.1e}); "
                "enlarge the radius or reduce the bandwidth"
            )
        n = grid.points_per_axis
        offsets = (np.arange(2 * n - 1) - (n - 1)) * grid.h
        sq = sum(o**2 for o in np.meshgrid(*([offsets] * grid.dim), indexing="ij"))
        weights = grid.cell_volume * self.kernel(sq)
        self._n = n
        self._fft_shape = (scipy.fft.next_fast_len(2 * n - 1, real=True),) * grid.dim
        self._axes = tuple(range(-grid.dim, 0))
        self._spectrum = scipy.fft.rfftn(weights, s=self._fft_shape, axes=self._axes)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        """Convolve an array whose trailing axes are the grid shape."""
        values = np.asarray(values, dtype=float)
        spec = scipy.fft.rfftn(values, s=self._fft_shape, axes=self._axes)
        full = scipy.fft.irfftn(spec * self._spectrum, s=self._fft_shape, axes=self._axes)
        n = self._n
        window = (Ellipsis,) + (slice(n - 1, 2 * n - 1),) * self.grid.dim
        return np.ascontiguousarray(full[window])

    def mass(self) -> np.ndarray:
        """Gridded kernel mass ``h^n sum_j Gamma(x_i - x_j)`` at every point."""
        return self(np.ones(self.grid.shape))


@lru_cache(maxsize=64)
def get_convolver(grid: Grid, bandwidth: float, tail_tol: float = DEFAULT_TAIL_TOL) -> Convolver:
    return Convolver(grid, bandwidth, tail_tol)


def _check_dims(kernel: GaussianKernel, f: Field):
    if kernel.dim != f.grid.dim:
        raise ValueError(f"kernel dimension {kernel.dim} does not match grid dimension {f.grid.dim}")


def convolve(kernel: GaussianKernel, f: Field, tail_tol: float = DEFAULT_TAIL_TOL) -> Field:
    _check_dims(kernel, f)
    conv = get_convolver(f.grid, kernel.bandwidth, tail_tol)
    return Field(f.grid, conv(f.values))


def convolve_direct(kernel: GaussianKernel, f: Field, tail_tol: float = DEFAULT_TAIL_TOL) -> Field:
    """O(N^2) reference path: explicit double sum over grid points, row blocks at a time."""
    _check_dims(kernel, f)
    grid = f.grid
    if tail_mass(kernel.bandwidth, grid.dim, grid.radius / 2) > tail_tol:
        raise KernelTailError(f"kernel bandwidth {kernel.bandwidth} too large for radius {grid.radius}")
    pts = np.stack([c.ravel() for c in grid.coords], axis=1)
    vals = f.flat
    out = np.empty(grid.size)
    block = 512
    for start in range(0, grid.size, block):
        diff = pts[start : start + block, None, :] - pts[None, :, :]
        w = kernel(np.sum(diff**2, axis=-1))
        out[start : start + block] = grid.cell_volume * (w @ vals)
    return Field(grid, out)


def phi_transform(spec: NominalSpec, kernel: GaussianKernel, k: Field, tail_tol: float = DEFAULT_TAIL_TOL) -> Field:
    return convolve(kernel, Field(k.grid, spec.value(k.values)), tail_tol)


def growth_fraction(
    spec: NominalSpec,
    k: Field,
    mu: float,
    eps: float,
    xi: float,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> Field:
    """Pointwise ``Phi_mu(k) / (Phi_eps(k) + xi)``, bounded above by ``(eps/mu)^n``."""
    if not 0 < mu <= eps:
        raise ValueError(f"growth fraction needs 0 < mu <= eps, got mu={mu}, eps={eps}")
    if not xi > 0:
        raise ValueError(f"xi must be positive, got {xi}")
    phi = spec.value(k.values)
    num = get_convolver(k.grid, mu, tail_tol)(phi)
    den = get_convolver(k.grid, eps, tail_tol)(phi) + xi
    return Field(k.grid, num / den)
