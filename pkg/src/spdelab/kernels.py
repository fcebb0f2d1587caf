"""Transition kernels of the tilted forward diffusion.

Constant-coefficient kernels are Gaussian and evaluated in closed form.
Two-phase kernels have no usable closed form; they are built numerically by
evolving discrete point masses under the kappa-flux parabolic operator

    dv/ds = (kappa(x) v')' - (b(x) + sigma(x) gamma) v',

whose divergence-form stencil keeps the flux kappa*v' continuous across the
interface, so the transmission conditions hold discretely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeffs import CoefficientField
from .grids import WeightedGrid, Field
from .operators import DiscreteOperator
from .stepping import crank_nicolson_evolve

__all__ = [
    "GaussianKernelParams",
    "TwoPhaseKernel",
    "BoundReport",
    "gaussian_density",
    "apply_kernel",
    "build_two_phase_kernel",
    "assemble_kappa_form",
    "aronson_bound_check",
]


@dataclass(frozen=True)
class GaussianKernelParams:
    """Parameters of the constant-coefficient kernel.

    sigma = sqrt(rho0*a0); drift is the tilted value b0 + sigma*gamma; kappa
    = rho0*a0/2 (so sigma^2 = 2*kappa by construction).
    """

    sigma: float
    drift: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")

    @property
    def kappa(self) -> float:
        return 0.5 * self.sigma**2

    @classmethod
    def from_field(cls, field: CoefficientField, gamma: float = 0.0,
                   drift_sign: float = 1.0) -> "GaussianKernelParams":
        if not field.is_constant:
            raise ValueError("Gaussian kernel parameters need constant coefficients")
        rho, a, b = field.sample(0.0)
        sigma = float(np.sqrt(rho * a))
        return cls(sigma=sigma, drift=drift_sign * b + sigma * gamma)


def gaussian_density(params: GaussianKernelParams, tau: float, x, y):
    """Density of N(x - drift*tau, sigma^2 tau) evaluated at y."""
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    var = params.sigma**2 * tau
    z = np.asarray(y) - np.asarray(x) + params.drift * tau
    return np.exp(-z * z / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


@dataclass(frozen=True)
class TwoPhaseKernel:
    """Transition densities p[i][j] ~ p(tau, x_i, y_j) on a shared grid."""

    tau: float
    grid: WeightedGrid
    p: np.ndarray                 # (n, n), row = target point x_i
    gamma: float
    clipped_mass: np.ndarray      # per column, mass removed by positivity clipping


def assemble_kappa_form(field: CoefficientField, grid: WeightedGrid,
                        gamma: float = 0.0, c: float = 0.0) -> DiscreteOperator:
    """Stencil of (kappa v')' - (b + sigma*gamma) v' + c v with midpoint kappas.

    One code path serves smooth and two-phase fields alike, which makes the
    degenerate-interface case reproduce the constant-coefficient solver bit
    for bit.  Boundary rows keep only the zero-order term, so spatially
    constant solutions are preserved exactly.
    """
    n, h = grid.n, grid.h
    rho_m, a_m, _ = field.tables(grid.midpoints())
    kappa_half = 0.5 * rho_m * a_m
    rho, a, b = field.tables(grid.nodes)
    drift = b + np.sqrt(rho * a) * gamma

    lower = np.zeros(n - 1)
    diag = np.full(n, c)
    upper = np.zeros(n - 1)
    diag[1:-1] += -(kappa_half[:-1] + kappa_half[1:]) / h**2
    upper[1:] = kappa_half[1:] / h**2 - drift[1:-1] / (2.0 * h)
    lower[:-1] = kappa_half[:-1] / h**2 + drift[1:-1] / (2.0 * h)
    upper[0] = 0.0
    lower[-1] = 0.0
    return DiscreteOperator(lower=lower, diag=diag, upper=upper,
                            kind="kappa_form", grid=grid)


def build_two_phase_kernel(field: CoefficientField, gamma: float, tau: float,
                           grid: WeightedGrid, n_steps: int) -> TwoPhaseKernel:
    """Evolve discrete deltas (mass 1/h per node) to time tau, column by column.

    All columns share one factorisation and are advanced together.  Negative
    entries produced by the startup are clipped to zero and the removed mass
    recorded per column.
    """
    if not field.is_piecewise:
        raise ValueError("two-phase kernels are built for piecewise fields")
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if n_steps < 4:
        raise ValueError("kernel construction needs n_steps >= 4")
    op = assemble_kappa_form(field, grid, gamma=gamma)
    w0 = np.eye(grid.n) / grid.h          # row j = column of the kernel
    w = crank_nicolson_evolve(op, w0, tau / n_steps, n_steps)
    p = w.T
    neg = np.minimum(p, 0.0)
    clipped = -neg.sum(axis=0) * grid.h
    return TwoPhaseKernel(tau=tau, grid=grid, p=np.maximum(p, 0.0),
                          gamma=gamma, clipped_mass=clipped)


def apply_kernel(kernel, g) -> Field:
    """Propagate a field through a kernel: (Pg)(x_i) = int p(tau, x_i, y) g(y) dy.

    `kernel` is either a TwoPhaseKernel or a (GaussianKernelParams, tau)
    pair; quadrature is trapezoidal in the plain dx measure.
    """
    if isinstance(kernel, TwoPhaseKernel):
        grid = kernel.grid
        gv = _on_grid(g, grid)
        out = kernel.p @ (gv * grid.quad_dx)
        return Field(out, grid)
    params, tau = kernel
    if not isinstance(g, Field):
        raise ValueError("the Gaussian branch needs a Field to supply the grid")
    grid = g.grid
    gv = _on_grid(g, grid)
    dens = gaussian_density(params, tau, grid.nodes[:, None], grid.nodes[None, :])
    return Field(dens @ (gv * grid.quad_dx), grid)


def _on_grid(g, grid: WeightedGrid) -> np.ndarray:
    gv = np.asarray(getattr(g, "values", g), dtype=float)
    if gv.shape != (grid.n,):
        raise ValueError("field does not live on the kernel's grid")
    return gv


@dataclass(frozen=True)
class BoundReport:
    n_checked: int
    n_violations: int
    worst_excess: float
    worst_pair: tuple[int, int] | None

    @property
    def passed(self) -> bool:
        return self.n_violations == 0


def aronson_bound_check(kernel: TwoPhaseKernel, C1: float, C2: float) -> BoundReport:
    """Screen p(tau,x,y) <= C1/sqrt(tau) * exp(-C2 |x-y|^2 / tau) entrywise."""
    if C2 <= 0.0:
        raise ValueError("C2 must be positive")
    x = kernel.grid.nodes
    d2 = (x[:, None] - x[None, :]) ** 2
    bound = (C1 / np.sqrt(kernel.tau)) * np.exp(-C2 * d2 / kernel.tau)
    excess = kernel.p - bound
    bad = excess > 0.0
    n_bad = int(bad.sum())
    if n_bad == 0:
        return BoundReport(n_checked=excess.size, n_violations=0,
                           worst_excess=0.0, worst_pair=None)
    flat = int(np.argmax(excess))
    ij = np.unravel_index(flat, excess.shape)
    return BoundReport(n_checked=excess.size, n_violations=n_bad,
                       worst_excess=float(excess[ij]), worst_pair=(int(ij[0]), int(ij[1])))
